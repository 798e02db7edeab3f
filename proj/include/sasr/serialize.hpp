#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

namespace sasr::io {

// All on-disk numbers are little-endian; vectors/matrices are 64-bit floats.

inline void write_u64(std::ostream& os, uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}

inline uint64_t read_u64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    if (!is) throw std::runtime_error("serialize: truncated stream reading u64");
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
    return v;
}

inline void write_f64(std::ostream& os, double d) {
    uint64_t v;
    std::memcpy(&v, &d, 8);
    write_u64(os, v);
}

inline double read_f64(std::istream& is) {
    uint64_t v = read_u64(is);
    double d;
    std::memcpy(&d, &v, 8);
    return d;
}

inline void write_f64_array(std::ostream& os, const double* data, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) write_f64(os, data[i]);
}

inline void read_f64_array(std::istream& is, double* data, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) data[i] = read_f64(is);
}

inline void write_string(std::ostream& os, const std::string& s) {
    write_u64(os, s.size());
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& is) {
    const uint64_t n = read_u64(is);
    std::string s(n, '\0');
    is.read(s.data(), static_cast<std::streamsize>(n));
    if (!is) throw std::runtime_error("serialize: truncated stream reading string");
    return s;
}

inline void write_vector(std::ostream& os, const Eigen::VectorXd& v) {
    write_u64(os, static_cast<uint64_t>(v.size()));
    write_f64_array(os, v.data(), static_cast<std::size_t>(v.size()));
}

inline Eigen::VectorXd read_vector(std::istream& is) {
    const uint64_t n = read_u64(is);
    Eigen::VectorXd v(static_cast<Eigen::Index>(n));
    read_f64_array(is, v.data(), n);
    return v;
}

inline void write_matrix(std::ostream& os, const Eigen::MatrixXd& m) {
    write_u64(os, static_cast<uint64_t>(m.rows()));
    write_u64(os, static_cast<uint64_t>(m.cols()));
    write_f64_array(os, m.data(), static_cast<std::size_t>(m.size()));
}

inline Eigen::MatrixXd read_matrix(std::istream& is) {
    const uint64_t rows = read_u64(is);
    const uint64_t cols = read_u64(is);
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    read_f64_array(is, m.data(), static_cast<std::size_t>(m.size()));
    return m;
}

inline void expect_magic(std::istream& is, uint64_t magic, const char* what) {
    if (read_u64(is) != magic) {
        throw std::runtime_error(std::string("serialize: bad magic for ") + what);
    }
}

}  // namespace sasr::io
