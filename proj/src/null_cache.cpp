#include "cbma/null_cache.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "cbma/error.hpp"
#include "cbma/hashing.hpp"
#include "cbma/io_util.hpp"

namespace cbma {

namespace {

constexpr char kMagic[] = "CBMANULL1\n";

template <typename T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

void put_string(std::ostream& out, const std::string& s) {
  put(out, static_cast<std::uint64_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void put_doubles(std::ostream& out, const std::vector<double>& v) {
  put(out, static_cast<std::uint64_t>(v.size()));
  out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
}

class Reader {
public:
  Reader(std::string data, std::filesystem::path path) : data_(std::move(data)), path_(std::move(path)) {}

  template <typename T>
  T get() {
    T v;
    need(sizeof(T));
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string get_string() {
    const auto n = get<std::uint64_t>();
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::vector<double> get_doubles() {
    const auto n = get<std::uint64_t>();
    if (n > (data_.size() - pos_) / sizeof(double)) fail();
    std::vector<double> v(n);
    std::memcpy(v.data(), data_.data() + pos_, n * sizeof(double));
    pos_ += n * sizeof(double);
    return v;
  }
  void expect_magic() {
    const std::size_t n = sizeof(kMagic) - 1;
    if (data_.compare(0, n, kMagic) != 0) throw IoError(path_.string() + ": not a null cache file");
    pos_ = n;
  }
  [[noreturn]] void fail() const { throw IoError(path_.string() + ": truncated null cache file"); }

private:
  void need(std::size_t n) const {
    if (n > data_.size() - pos_) fail();
  }
  std::string data_;
  std::filesystem::path path_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string null_cache_key(const std::string& analysis_key, const std::string& kind, std::uint64_t n_iter,
                           std::uint64_t seed, const std::string& extra) {
  std::ostringstream out;
  out << analysis_key << '-' << kind << '-' << n_iter << '-' << seed;
  if (!extra.empty()) out << '-' << Fnv1a().text(extra).hex();
  return out.str();
}

void save_null(const std::filesystem::path& path, const NullDistribution& null, const std::string& key) {
  write_atomic(path, [&](std::ostream& out) {
    out.write(kMagic, sizeof(kMagic) - 1);
    put_string(out, key);
    put_string(out, null.fingerprint());
    put(out, static_cast<std::uint8_t>(null.method()));
    if (null.is_empirical()) {
      put(out, std::uint8_t{0});
      put_doubles(out, null.empirical().samples);
    } else {
      const auto& h = null.hist();
      put(out, std::uint8_t{1});
      put(out, static_cast<std::uint8_t>(h.axis));
      put(out, h.bin_width);
      put(out, h.min_bin);
      put(out, static_cast<std::uint8_t>(h.exact));
      put_doubles(out, h.probs);
    }
  });
}

std::string peek_null_key(const std::filesystem::path& path) {
  Reader in(read_file(path), path);
  in.expect_magic();
  return in.get_string();
}

NullDistribution load_null(const std::filesystem::path& path, const std::string& expected_key) {
  Reader in(read_file(path), path);
  in.expect_magic();
  const auto key = in.get_string();
  if (!expected_key.empty() && key != expected_key)
    throw FingerprintMismatch(path.string() + ": cached null was built for a different configuration");
  auto fingerprint = in.get_string();
  const auto method_tag = in.get<std::uint8_t>();
  if (method_tag > 2) in.fail();
  const auto method = static_cast<Method>(method_tag);
  const auto kind = in.get<std::uint8_t>();
  if (kind == 0) return NullDistribution::empirical_max(method, in.get_doubles(), std::move(fingerprint));
  if (kind != 1) in.fail();
  BinnedHistogram h;
  const auto axis = in.get<std::uint8_t>();
  if (axis > 1) in.fail();
  h.axis = static_cast<NullAxis>(axis);
  h.bin_width = in.get<double>();
  h.min_bin = in.get<std::int64_t>();
  h.exact = in.get<std::uint8_t>() != 0;
  h.probs = in.get_doubles();
  return NullDistribution::histogram(method, std::move(h), std::move(fingerprint), false);
}

}  // namespace cbma
