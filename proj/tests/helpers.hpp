#pragma once

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "senh/rng.hpp"
#include "senh/tensor.hpp"

namespace testutil {

// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    dir_ = std::filesystem::temp_directory_path() /
           ("senh_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(dir_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(dir_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (dir_ / name).string(); }
  const std::filesystem::path& path() const { return dir_; }

 private:
  std::filesystem::path dir_;
};

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void spit(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

inline senh::Tensor random_tensor(senh::Shape shape, senh::Rng& rng, double lo = -1.0,
                                  double hi = 1.0) {
  senh::Tensor t(std::move(shape));
  for (double& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

// Random values bounded away from zero, for ops with a kink or pole there.
inline senh::Tensor random_signed_tensor(senh::Shape shape, senh::Rng& rng, double min_mag = 0.2,
                                         double max_mag = 1.0) {
  senh::Tensor t(std::move(shape));
  for (double& v : t.data()) {
    const double mag = rng.uniform(min_mag, max_mag);
    v = rng.uniform() < 0.5 ? -mag : mag;
  }
  return t;
}

inline double max_abs_diff(const senh::Tensor& a, const senh::Tensor& b) {
  double worst = 0.0;
  for (size_t i = 0; i < a.data().size(); ++i)
    worst = std::max(worst, std::abs(a.data()[i] - b.data()[i]));
  return worst;
}

inline bool bitwise_equal(const senh::Tensor& a, const senh::Tensor& b) {
  if (a.shape() != b.shape()) return false;
  for (size_t i = 0; i < a.data().size(); ++i)
    if (a.data()[i] != b.data()[i]) return false;
  return true;
}

}  // namespace testutil
