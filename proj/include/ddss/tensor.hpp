#pragma once
#include <cstddef>
#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace ddss::tg {

// Tracks live/peak bytes of tensor payloads, bucketed by a caller-declared
// tag (e.g. "score_interior"). Used by the rematerialization tests to show
// the backward pass keeps at most one score-network activation set alive.
class Accountant {
 public:
  static Accountant& instance();

  int tag_id(const std::string& name);  // registers on first use; 0 = default
  void on_alloc(std::size_t bytes, int tag);
  void on_free(std::size_t bytes, int tag);
  void move_bytes(std::size_t bytes, int from_tag, int to_tag);

  std::size_t live(int tag) const;
  std::size_t peak(int tag) const;
  std::size_t live_total() const;
  std::size_t peak_total() const;
  void reset_peaks();

  // RAII: allocations made while a scope is alive get its tag.
  class Scope {
   public:
    explicit Scope(const std::string& name);
    ~Scope();
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    int prev_;
  };
  static int current_tag();

 private:
  Accountant() = default;
  struct Counter {
    std::size_t live = 0;
    std::size_t peak = 0;
  };
  mutable std::mutex mu_;
  std::vector<Counter> counters_{1, Counter{}};
  std::vector<std::string> names_{"default"};
  std::size_t live_total_ = 0;
  std::size_t peak_total_ = 0;
};

class Storage {
 public:
  explicit Storage(std::size_t n);
  ~Storage();
  Storage(const Storage&) = delete;
  Storage& operator=(const Storage&) = delete;

  double* data() { return buf_.data(); }
  const double* data() const { return buf_.data(); }
  std::size_t size() const { return buf_.size(); }
  int tag() const { return tag_; }
  void retag(int tag);

 private:
  std::vector<double> buf_;
  int tag_ = 0;
};

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& s);

// Dense row-major float64 tensor, rank 1 or 2 (scalars are shape {1}).
// Value semantics with shared immutable payload: ops allocate fresh storage
// and never write through an already-published tensor.
class Tensor {
 public:
  Tensor() = default;
  static Tensor zeros(const Shape& s);
  static Tensor full(const Shape& s, double v);
  static Tensor scalar(double v);
  static Tensor from(const Shape& s, std::vector<double> v);

  bool defined() const { return static_cast<bool>(st_); }
  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return st_ ? st_->size() : 0; }
  std::size_t rows() const;
  std::size_t cols() const;

  const double* data() const { return st_->data(); }
  // Only valid while the tensor is being filled, before anyone else holds it.
  double* mut() { return st_->data(); }
  double at(std::size_t i) const { return st_->data()[i]; }
  double item() const;  // requires size()==1

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
  std::shared_ptr<Storage> storage() const { return st_; }

 private:
  std::shared_ptr<Storage> st_;
  Shape shape_;
};

std::uint64_t fnv1a(const void* data, std::size_t bytes, std::uint64_t seed = 0xcbf29ce484222325ull);
std::uint64_t tensor_hash(const Tensor& t);

}  // namespace ddss::tg
