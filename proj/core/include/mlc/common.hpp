#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mlc {

enum class ClassLabel { class1, class2 };

inline const char* to_string(ClassLabel c) {
    return c == ClassLabel::class1 ? "class1" : "class2";
}

ClassLabel class_label_from_string(const std::string& s);

// Thrown by every operation that rejects its input.
class MlcError : public std::runtime_error {
public:
    explicit MlcError(const std::string& what) : std::runtime_error(what) {}
};

// splitmix64; used to derive independent per-stage seeds from one root seed.
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream);

using Rng = std::mt19937_64;

// Linear-interpolation percentile, p in [0,1]. Matches the usual
// "exclusive of endpoints" definition: index p*(n-1) into the sorted values.
double percentile(std::span<const double> values, double p);

double mean(std::span<const double> values);

// Sample standard deviation (n-1 denominator); 0 for n < 2.
double sample_sd(std::span<const double> values);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& contents);

// Minimal RFC-4180-ish CSV: quoted fields with embedded commas supported,
// no multi-line fields.
std::vector<std::string> split_csv_line(const std::string& line);

}  // namespace mlc
