#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace cdrn {

#ifdef CDRN_REAL64
using real = double;
#else
using real = float;
#endif

using Shape = std::vector<int>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);
bool shape_eq(const Shape& a, const Shape& b);

[[noreturn]] void fail(const std::string& what);

// Runtime toggle for post-op finiteness scans. Defaults to on in debug
// builds, off otherwise.
void set_finite_checks(bool on);
bool finite_checks_enabled();

class Graph;

struct TensorData {
    Shape shape;
    std::vector<real> values;
    std::vector<real> grad;  // sized lazily during backward
    bool requires_grad = false;
    int node = -1;  // producing op index on `tape`, -1 for leaves
    Graph* tape = nullptr;
    std::uint64_t tape_gen = 0;
};

// Shared-handle dense tensor. Value semantics at the handle level: ops
// produce fresh tensors and never mutate inputs. Mutable access exists for
// construction, initialization, and optimizer updates on leaf parameters.
class Tensor {
  public:
    Tensor() = default;

    static Tensor zeros(Shape shape);
    static Tensor full(Shape shape, real value);
    static Tensor from(Shape shape, std::vector<real> values);
    static Tensor scalar(real value);

    bool defined() const { return static_cast<bool>(d_); }
    const Shape& shape() const;
    int dim(int i) const;
    int ndim() const;
    std::size_t numel() const;

    std::span<const real> values() const;
    std::span<real> mut();
    real item() const;

    Tensor& set_requires_grad(bool on);
    bool requires_grad() const;
    // True when backward must deliver a gradient here: either a tracked leaf
    // or an interior node of the currently recording graph.
    bool grad_needed() const;
    bool has_grad() const;
    std::span<const real> grad() const;
    std::span<real> grad_mut();  // allocates a zeroed buffer on first use
    void zero_grad();

    Tensor detached() const;
    Tensor clone() const;

    TensorData* raw() const { return d_.get(); }
    const std::shared_ptr<TensorData>& handle() const { return d_; }

  private:
    explicit Tensor(std::shared_ptr<TensorData> d) : d_(std::move(d)) {}
    std::shared_ptr<TensorData> d_;
};

// Dynamic tape. Ops append nodes in execution order, which is already a
// topological order of the data flow; backward replays it in reverse once.
class Graph {
  public:
    Graph() = default;
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    // Registers `out` as produced by a recorded op. `backward` must add the
    // upstream gradient contributions of every grad-needing input.
    void record(const Tensor& out, std::function<void()> backward);

    // Seeds d(loss)/d(loss)=1 and propagates to every reachable input.
    // `loss` must be a scalar produced by this graph's current recording.
    void backward(const Tensor& loss);

    void reset();
    std::size_t size() const { return nodes_.size(); }
    bool backward_done() const { return backward_done_; }
    std::uint64_t generation() const { return gen_; }

    static Graph* current();

  private:
    friend class GraphScope;
    struct Node {
        std::function<void()> backward;
    };
    std::vector<Node> nodes_;
    std::vector<std::shared_ptr<TensorData>> outputs_;
    bool backward_done_ = false;
    std::uint64_t gen_ = 1;
};

// RAII scope making `g` the recording graph for the current thread.
class GraphScope {
  public:
    explicit GraphScope(Graph& g);
    ~GraphScope();
    GraphScope(const GraphScope&) = delete;
    GraphScope& operator=(const GraphScope&) = delete;

  private:
    Graph* prev_;
};

// RAII scope suppressing recording even when a graph is active.
class NoGradScope {
  public:
    NoGradScope();
    ~NoGradScope();
    NoGradScope(const NoGradScope&) = delete;
    NoGradScope& operator=(const NoGradScope&) = delete;

  private:
    Graph* prev_;
};

}  // namespace cdrn
