#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace hetmeg::io {

// HMEG binary matrix: "HMEG", u16 version = 1, u8 dtype = 0 (f64), u8 pad,
// u64 rows, u64 cols, row-major little-endian f64 payload.
inline constexpr std::uint16_t kHmegVersion = 1;
inline constexpr std::size_t kHmegHeaderBytes = 24;

void write_hmeg(std::ostream& out, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_hmeg(std::istream& in);

void write_hmeg(const std::filesystem::path& path, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_hmeg(const std::filesystem::path& path);
Eigen::VectorXd read_hmeg_vector(const std::filesystem::path& path);

/// CRC-32 of a file's bytes as 8 lowercase hex digits.
std::string file_checksum(const std::filesystem::path& path);
std::string checksum(const std::string& bytes);

/// Shortest text that reads back to the same double ("%.17g"; nan/inf spelled out).
std::string format_number(double v);
double parse_number(const std::string& s);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

CsvTable read_csv(std::istream& in);
void write_csv(std::ostream& out, const CsvTable& table);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

} // namespace hetmeg::io
