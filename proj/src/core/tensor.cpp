#include "core/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace cdrn {

namespace {
thread_local Graph* g_current_graph = nullptr;

#ifdef NDEBUG
bool g_finite_checks = false;
#else
bool g_finite_checks = true;
#endif
}  // namespace

void set_finite_checks(bool on) { g_finite_checks = on; }
bool finite_checks_enabled() { return g_finite_checks; }

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (int e : shape) {
        if (e < 0) fail("negative extent in shape " + shape_str(shape));
        n *= static_cast<std::size_t>(e);
    }
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

bool shape_eq(const Shape& a, const Shape& b) { return a == b; }

void fail(const std::string& what) { throw std::runtime_error(what); }

Tensor Tensor::zeros(Shape shape) {
    auto d = std::make_shared<TensorData>();
    d->values.assign(shape_numel(shape), real(0));
    d->shape = std::move(shape);
    return Tensor(std::move(d));
}

Tensor Tensor::full(Shape shape, real value) {
    auto d = std::make_shared<TensorData>();
    d->values.assign(shape_numel(shape), value);
    d->shape = std::move(shape);
    return Tensor(std::move(d));
}

Tensor Tensor::from(Shape shape, std::vector<real> values) {
    if (values.size() != shape_numel(shape))
        fail("tensor data length " + std::to_string(values.size()) +
             " does not match shape " + shape_str(shape));
    auto d = std::make_shared<TensorData>();
    d->shape = std::move(shape);
    d->values = std::move(values);
    return Tensor(std::move(d));
}

Tensor Tensor::scalar(real value) { return from({1}, {value}); }

const Shape& Tensor::shape() const {
    if (!d_) fail("shape() on undefined tensor");
    return d_->shape;
}

int Tensor::dim(int i) const {
    const Shape& s = shape();
    if (i < 0 || i >= static_cast<int>(s.size()))
        fail("dim " + std::to_string(i) + " out of range for " + shape_str(s));
    return s[static_cast<std::size_t>(i)];
}

int Tensor::ndim() const { return static_cast<int>(shape().size()); }

std::size_t Tensor::numel() const {
    if (!d_) return 0;
    return d_->values.size();
}

std::span<const real> Tensor::values() const {
    if (!d_) fail("values() on undefined tensor");
    return {d_->values.data(), d_->values.size()};
}

std::span<real> Tensor::mut() {
    if (!d_) fail("mut() on undefined tensor");
    return {d_->values.data(), d_->values.size()};
}

real Tensor::item() const {
    if (numel() != 1) fail("item() requires a single-element tensor, got " + shape_str(shape()));
    return d_->values[0];
}

Tensor& Tensor::set_requires_grad(bool on) {
    if (!d_) fail("set_requires_grad() on undefined tensor");
    d_->requires_grad = on;
    return *this;
}

bool Tensor::requires_grad() const { return d_ && d_->requires_grad; }

bool Tensor::grad_needed() const {
    if (!d_) return false;
    if (d_->requires_grad) return true;
    Graph* g = Graph::current();
    return g && d_->tape == g && d_->tape_gen == g->generation() && d_->node >= 0;
}

bool Tensor::has_grad() const { return d_ && !d_->grad.empty(); }

std::span<const real> Tensor::grad() const {
    if (!d_ || d_->grad.empty()) return {};
    return {d_->grad.data(), d_->grad.size()};
}

std::span<real> Tensor::grad_mut() {
    if (!d_) fail("grad_mut() on undefined tensor");
    if (d_->grad.empty()) d_->grad.assign(d_->values.size(), real(0));
    return {d_->grad.data(), d_->grad.size()};
}

void Tensor::zero_grad() {
    if (d_) d_->grad.clear();
}

Tensor Tensor::detached() const {
    if (!d_) return Tensor();
    auto d = std::make_shared<TensorData>();
    d->shape = d_->shape;
    d->values = d_->values;
    return Tensor(std::move(d));
}

Tensor Tensor::clone() const { return detached(); }

void Graph::record(const Tensor& out, std::function<void()> backward) {
    if (backward_done_)
        fail("recording on a graph whose backward already ran; reset() first");
    TensorData* d = out.raw();
    d->node = static_cast<int>(nodes_.size());
    d->tape = this;
    d->tape_gen = gen_;
    nodes_.push_back(Node{std::move(backward)});
    outputs_.push_back(out.handle());
}

void Graph::backward(const Tensor& loss) {
    if (backward_done_) fail("backward() already ran on this graph; reset() first");
    if (loss.numel() != 1) fail("backward() requires a scalar loss, got " + shape_str(loss.shape()));
    TensorData* d = loss.raw();
    if (d->tape != this || d->tape_gen != gen_ || d->node < 0)
        fail("backward() on a loss detached from this graph");
    backward_done_ = true;
    loss.raw()->grad.assign(1, real(1));
    for (int i = d->node; i >= 0; --i) nodes_[static_cast<std::size_t>(i)].backward();
}

void Graph::reset() {
    nodes_.clear();
    outputs_.clear();
    backward_done_ = false;
    ++gen_;
}

Graph* Graph::current() { return g_current_graph; }

GraphScope::GraphScope(Graph& g) : prev_(g_current_graph) { g_current_graph = &g; }

GraphScope::~GraphScope() { g_current_graph = prev_; }

NoGradScope::NoGradScope() : prev_(g_current_graph) { g_current_graph = nullptr; }

NoGradScope::~NoGradScope() { g_current_graph = prev_; }

}  // namespace cdrn
