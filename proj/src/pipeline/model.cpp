#include "pipeline/model.hpp"

namespace cdrn {

Model::Model(const Config& cfg, std::uint64_t seed) : params_(std::make_unique<ParamSet>()) {
    det_cfg_ = cfg.detector;
    det_cfg_.num_classes = static_cast<int>(cfg.data.classes.size());
    Rng rng(seed);
    derain_ = DerainNet(cfg.derain, *params_, "derain", rng);
    det_ = Detector(det_cfg_, *params_, "detector", rng);
}

void Model::freeze_all() { params_->set_requires_grad(false); }

void Model::set_trainable_for_stage(int stage) {
    freeze_all();
    switch (stage) {
        case 1:
            params_->set_requires_grad_prefix("detector.", true);
            break;
        case 2:
            params_->set_requires_grad_prefix("derain.", true);
            break;
        case 3:
            params_->set_requires_grad(true);
            break;
        default:
            fail("set_trainable_for_stage: stage must be 1, 2 or 3");
    }
}

void Model::load_tensors(const Checkpoint& ckpt) {
    if (ckpt.tensors.size() != params_->size())
        fail("checkpoint holds " + std::to_string(ckpt.tensors.size()) + " tensors but the model has " +
             std::to_string(params_->size()));
    for (const auto& t : ckpt.tensors) {
        Tensor* p = params_->find(t.name);
        if (!p) fail("checkpoint tensor '" + t.name + "' does not exist in the model");
        if (!shape_eq(t.shape, p->shape()))
            fail("checkpoint parameter '" + t.name + "' has shape " + shape_str(t.shape) +
                 " but the model expects " + shape_str(p->shape()));
        auto dst = p->mut();
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<real>(t.values[i]);
        p->zero_grad();
    }
}

Checkpoint Model::snapshot() const {
    Checkpoint ckpt;
    for (const auto& e : params_->entries()) {
        Checkpoint::NamedTensor t;
        t.name = e.name;
        t.shape = e.tensor.shape();
        t.values.reserve(e.tensor.numel());
        for (real v : e.tensor.values()) t.values.push_back(static_cast<float>(v));
        ckpt.tensors.push_back(std::move(t));
    }
    return ckpt;
}

}  // namespace cdrn
