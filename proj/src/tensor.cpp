#include "ddss/tensor.hpp"

#include <cstring>
#include <sstream>

#include "ddss/errors.hpp"

namespace ddss::tg {

namespace {
thread_local int g_current_tag = 0;
}

Accountant& Accountant::instance() {
  static Accountant a;
  return a;
}

int Accountant::tag_id(const std::string& name) {
  std::lock_guard<std::mutex> lk(mu_);
  for (std::size_t i = 0; i < names_.size(); ++i)
    if (names_[i] == name) return static_cast<int>(i);
  names_.push_back(name);
  counters_.push_back(Counter{});
  return static_cast<int>(names_.size() - 1);
}

void Accountant::on_alloc(std::size_t bytes, int tag) {
  std::lock_guard<std::mutex> lk(mu_);
  auto& c = counters_[static_cast<std::size_t>(tag)];
  c.live += bytes;
  if (c.live > c.peak) c.peak = c.live;
  live_total_ += bytes;
  if (live_total_ > peak_total_) peak_total_ = live_total_;
}

void Accountant::on_free(std::size_t bytes, int tag) {
  std::lock_guard<std::mutex> lk(mu_);
  counters_[static_cast<std::size_t>(tag)].live -= bytes;
  live_total_ -= bytes;
}

void Accountant::move_bytes(std::size_t bytes, int from_tag, int to_tag) {
  if (from_tag == to_tag) return;
  std::lock_guard<std::mutex> lk(mu_);
  counters_[static_cast<std::size_t>(from_tag)].live -= bytes;
  auto& c = counters_[static_cast<std::size_t>(to_tag)];
  c.live += bytes;
  if (c.live > c.peak) c.peak = c.live;
}

std::size_t Accountant::live(int tag) const {
  std::lock_guard<std::mutex> lk(mu_);
  return counters_[static_cast<std::size_t>(tag)].live;
}

std::size_t Accountant::peak(int tag) const {
  std::lock_guard<std::mutex> lk(mu_);
  return counters_[static_cast<std::size_t>(tag)].peak;
}

std::size_t Accountant::live_total() const {
  std::lock_guard<std::mutex> lk(mu_);
  return live_total_;
}

std::size_t Accountant::peak_total() const {
  std::lock_guard<std::mutex> lk(mu_);
  return peak_total_;
}

void Accountant::reset_peaks() {
  std::lock_guard<std::mutex> lk(mu_);
  for (auto& c : counters_) c.peak = c.live;
  peak_total_ = live_total_;
}

Accountant::Scope::Scope(const std::string& name) : prev_(g_current_tag) {
  g_current_tag = Accountant::instance().tag_id(name);
}

Accountant::Scope::~Scope() { g_current_tag = prev_; }

int Accountant::current_tag() { return g_current_tag; }

Storage::Storage(std::size_t n) : buf_(n, 0.0), tag_(g_current_tag) {
  Accountant::instance().on_alloc(n * sizeof(double), tag_);
}

Storage::~Storage() {
  Accountant::instance().on_free(buf_.size() * sizeof(double), tag_);
}

void Storage::retag(int tag) {
  Accountant::instance().move_bytes(buf_.size() * sizeof(double), tag_, tag);
  tag_ = tag;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << "]";
  return os.str();
}

namespace {
std::size_t shape_elems(const Shape& s) {
  if (s.empty() || s.size() > 2) throw ShapeError("tensor rank must be 1 or 2, got " + shape_str(s));
  std::size_t n = 1;
  for (auto d : s) {
    if (d == 0) throw ShapeError("zero-sized dimension in " + shape_str(s));
    n *= d;
  }
  return n;
}
}  // namespace

Tensor Tensor::zeros(const Shape& s) {
  Tensor t;
  t.st_ = std::make_shared<Storage>(shape_elems(s));
  t.shape_ = s;
  return t;
}

Tensor Tensor::full(const Shape& s, double v) {
  Tensor t = zeros(s);
  double* p = t.mut();
  for (std::size_t i = 0; i < t.size(); ++i) p[i] = v;
  return t;
}

Tensor Tensor::scalar(double v) { return full({1}, v); }

Tensor Tensor::from(const Shape& s, std::vector<double> v) {
  if (shape_elems(s) != v.size())
    throw ShapeError("tensor_from: " + shape_str(s) + " needs " +
                     std::to_string(shape_elems(s)) + " values, got " + std::to_string(v.size()));
  Tensor t = zeros(s);
  std::memcpy(t.mut(), v.data(), v.size() * sizeof(double));
  return t;
}

std::size_t Tensor::rows() const { return shape_.empty() ? 0 : shape_[0]; }

std::size_t Tensor::cols() const {
  return shape_.size() == 2 ? shape_[1] : (shape_.size() == 1 ? shape_[0] : 0);
}

double Tensor::item() const {
  if (size() != 1) throw ShapeError("item() on non-scalar tensor " + shape_str(shape_));
  return st_->data()[0];
}

std::uint64_t fnv1a(const void* data, std::size_t bytes, std::uint64_t seed) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < bytes; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t tensor_hash(const Tensor& t) {
  std::uint64_t h = fnv1a(t.data(), t.size() * sizeof(double));
  for (auto d : t.shape()) h = fnv1a(&d, sizeof(d), h);
  return h;
}

}  // namespace ddss::tg
