#include "hetmeg/io.hpp"

#include "hetmeg/error.hpp"

#include <boost/crc.hpp>

#include <bit>
#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

static_assert(std::endian::native == std::endian::little, "HMEG I/O assumes a little-endian host");

namespace hetmeg::io {

namespace {

template <typename T>
void put(std::ostream& out, T v)
{
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in)
{
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw DataError("truncated HMEG stream");
    return v;
}

} // namespace

void write_hmeg(std::ostream& out, const Eigen::MatrixXd& m)
{
    out.write("HMEG", 4);
    put<std::uint16_t>(out, kHmegVersion);
    put<std::uint8_t>(out, 0);
    put<std::uint8_t>(out, 0);
    put<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m;
    out.write(reinterpret_cast<const char*>(rm.data()),
              static_cast<std::streamsize>(rm.size() * sizeof(double)));
    if (!out) throw DataError("failed writing HMEG stream");
}

Eigen::MatrixXd read_hmeg(std::istream& in)
{
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "HMEG", 4) != 0) throw DataError("not an HMEG file (bad magic)");
    const auto version = get<std::uint16_t>(in);
    if (version != kHmegVersion) throw DataError("unsupported HMEG version " + std::to_string(version));
    const auto dtype = get<std::uint8_t>(in);
    if (dtype != 0) throw DataError("unsupported HMEG dtype " + std::to_string(dtype));
    (void)get<std::uint8_t>(in);
    const auto rows = get<std::uint64_t>(in);
    const auto cols = get<std::uint64_t>(in);
    if (rows > (1ULL << 32) || cols > (1ULL << 32)) throw DataError("implausible HMEG dimensions");

    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(
        static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    in.read(reinterpret_cast<char*>(rm.data()), static_cast<std::streamsize>(rm.size() * sizeof(double)));
    if (!in) throw DataError("truncated HMEG payload");
    return rm;
}

void write_hmeg(const std::filesystem::path& path, const Eigen::MatrixXd& m)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open " + path.string() + " for writing");
    write_hmeg(out, m);
}

Eigen::MatrixXd read_hmeg(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    return read_hmeg(in);
}

Eigen::VectorXd read_hmeg_vector(const std::filesystem::path& path)
{
    Eigen::MatrixXd m = read_hmeg(path);
    if (m.cols() != 1) throw DataError(path.string() + " is not a column vector");
    return m.col(0);
}

std::string checksum(const std::string& bytes)
{
    boost::crc_32_type crc;
    crc.process_bytes(bytes.data(), bytes.size());
    char buf[9];
    std::snprintf(buf, sizeof buf, "%08x", static_cast<unsigned>(crc.checksum()));
    return buf;
}

std::string file_checksum(const std::filesystem::path& path) { return checksum(read_text(path)); }

std::string format_number(double v)
{
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double parse_number(const std::string& s)
{
    if (s == "nan") return std::nan("");
    if (s == "inf") return HUGE_VAL;
    if (s == "-inf") return -HUGE_VAL;
    if (s.empty() || std::isspace(static_cast<unsigned char>(s.front())))
        throw DataError("not a number: '" + s + "'");
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(s.c_str(), &end);
    // Underflow to a subnormal or zero is fine.
    const bool overflow = errno == ERANGE && std::isinf(v);
    if (end != s.c_str() + s.size() || overflow) throw DataError("not a number: '" + s + "'");
    return v;
}

namespace {

std::vector<std::string> split_row(const std::string& line)
{
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

} // namespace

CsvTable read_csv(std::istream& in)
{
    CsvTable table;
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty CSV");
    table.header = split_row(line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto row = split_row(line);
        if (row.size() != table.header.size()) throw DataError("CSV row width differs from header");
        table.rows.push_back(std::move(row));
    }
    return table;
}

void write_csv(std::ostream& out, const CsvTable& table)
{
    auto emit = [&out](const std::vector<std::string>& cells) {
        for (std::size_t k = 0; k < cells.size(); ++k) out << (k ? "," : "") << cells[k];
        out << '\n';
    };
    emit(table.header);
    for (const auto& row : table.rows) emit(row);
}

std::string read_text(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open " + path.string() + " for writing");
    out << text;
}

} // namespace hetmeg::io
