#include "pipeline/trainer.hpp"

#include <algorithm>
#include <cstdio>

#include "json.hpp"
#include "loss/losses.hpp"

namespace cdrn {

double lr_schedule(int stage, int epoch, double base_lr, int halve_epoch) {
    if (stage == 3) return base_lr;
    if (stage != 1 && stage != 2) fail("lr_schedule: stage must be 1, 2 or 3");
    return epoch >= halve_epoch ? base_lr / 2 : base_lr;
}

namespace {

const StageTrainConfig& stage_train_config(const Config& cfg, int stage) {
    switch (stage) {
        case 1:
            return cfg.train.stage1;
        case 2:
            return cfg.train.stage2;
        case 3:
            return cfg.train.stage3;
        default:
            fail("run_stage: stage must be 1, 2 or 3");
    }
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(seed);
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = rng.uniform_int(i);
        std::swap(order[i - 1], order[j]);
    }
    return order;
}

Tensor stack_images(const std::vector<const ImageSample*>& batch, bool rainy) {
    const Tensor& first = rainy ? batch[0]->rainy : batch[0]->clean;
    const int h = first.dim(1), w = first.dim(2);
    Tensor out = Tensor::zeros({static_cast<int>(batch.size()), 3, h, w});
    auto dst = out.mut();
    const std::size_t step = static_cast<std::size_t>(3) * h * w;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const Tensor& src = rainy ? batch[i]->rainy : batch[i]->clean;
        if (src.dim(1) != h || src.dim(2) != w)
            fail("run_stage: dataset images disagree in size; rebuild with one target resolution");
        std::copy(src.values().begin(), src.values().end(), dst.begin() + static_cast<std::ptrdiff_t>(i * step));
    }
    return out;
}

void restore_optimizer(AdamState& adam, const Checkpoint& ckpt) {
    std::vector<AdamState::Slot> slots;
    if (ckpt.optimizer_slots.size() != adam.slots().size())
        fail("checkpoint optimizer state does not match the stage's trainable set");
    for (std::size_t i = 0; i < ckpt.optimizer_slots.size(); ++i) {
        const auto& src = ckpt.optimizer_slots[i];
        if (src.name != adam.slots()[i].name)
            fail("checkpoint optimizer slot '" + src.name + "' does not match trainable parameter '" +
                 adam.slots()[i].name + "'");
        AdamState::Slot s;
        s.name = src.name;
        s.m.assign(src.m.begin(), src.m.end());
        s.v.assign(src.v.begin(), src.v.end());
        slots.push_back(std::move(s));
    }
    adam.restore(std::move(slots), ckpt.optimizer_step);
}

}  // namespace

StageResult run_stage(const Config& cfg, int stage, const Dataset& data, const Checkpoint* init) {
    cfg.validate();
    const StageTrainConfig& sc = stage_train_config(cfg, stage);
    if (data.train.empty()) fail("run_stage: the dataset has no training split");

    Model model(cfg, cfg.seed);
    model.set_trainable_for_stage(stage);

    int start_epoch = 0;
    std::uint64_t global_step = 0;
    bool resume = false;

    if (init) {
        if (init->config_checksum != config_checksum(cfg)) {
            if (cfg.train.checkpoint_mismatch == "fail")
                fail("checkpoint config checksum mismatch; pass train.checkpoint_mismatch=warn to override");
            std::fprintf(stderr, "warning: checkpoint config checksum mismatch, continuing\n");
        }
        if (init->stage == stage) {
            resume = init->epoch < sc.epochs;
            start_epoch = std::min(init->epoch, sc.epochs);
            global_step = init->global_step;
            model.load_tensors(*init);
        } else if (init->stage == stage - 1) {
            model.load_tensors(*init);
        } else {
            fail("stage " + std::to_string(stage) + " requires a stage " + std::to_string(stage - 1) +
                 " checkpoint, got stage " + std::to_string(init->stage));
        }
    } else if (stage != 1) {
        fail("stage " + std::to_string(stage) + " requires a stage " + std::to_string(stage - 1) +
             " checkpoint");
    }

    AdamConfig acfg;
    acfg.lr = sc.lr;
    AdamState adam(model.params(), acfg);
    if (resume && init->has_optimizer) restore_optimizer(adam, *init);

    const bool needs_grids = stage == 1 || stage == 3;
    std::vector<LevelGrid> grids;
    if (needs_grids) grids = model.detector().level_grids(data.height, data.width);

    StageResult result;
    for (int epoch = start_epoch; epoch < sc.epochs; ++epoch) {
        const double lr = lr_schedule(stage, epoch, sc.lr, sc.halve_epoch);
        adam.set_lr(lr);
        EpochLog log;
        log.stage = stage;
        log.epoch = epoch;
        log.lr = lr;

        const auto order = epoch_order(
            data.train.size(), derive_seed(cfg.seed, "stage" + std::to_string(stage) + "/epoch" +
                                                          std::to_string(epoch)));
        for (std::size_t pos = 0; pos < order.size(); pos += static_cast<std::size_t>(cfg.train.batch_size)) {
            std::vector<const ImageSample*> batch;
            std::vector<std::vector<Annotation>> gts;
            for (std::size_t i = pos;
                 i < std::min(order.size(), pos + static_cast<std::size_t>(cfg.train.batch_size)); ++i) {
                batch.push_back(&data.train[order[i]]);
                gts.push_back(data.train[order[i]].annotations);
            }

            Graph g;
            GraphScope scope(g);
            Tensor total, derain_part, downstream;
            DownstreamLosses dl;
            if (stage == 1) {
                Tensor clean = stack_images(batch, false);
                DetectorOutput out = model.detector().forward(clean);
                AssignedBatch targets = assign_batch(gts, grids, model.detector_config());
                dl = downstream_focal_suite(out, targets);
                total = total_loss(1, Tensor(), dl.total);
            } else if (stage == 2) {
                Tensor clean = stack_images(batch, false);
                Tensor rainy = stack_images(batch, true);
                auto [img1, img2] = model.derain().forward(rainy, true);
                std::vector<Tensor> outputs;
                if (model.derain().config().supervise_stage1) outputs.push_back(img1);
                outputs.push_back(img2);
                derain_part = l_derain(2, clean, outputs);
                if (sc.fml_enabled) {
                    auto fb_clean = model.detector().backbone_forward(clean);
                    auto fb_derained = model.detector().backbone_forward(img2);
                    downstream =
                        feature_map_loss(fb_clean, fb_derained, model.params(), "detector.");
                } else {
                    downstream = Tensor::scalar(0);
                }
                total = total_loss(2, derain_part, downstream);
            } else {
                Tensor clean = stack_images(batch, false);
                Tensor rainy = stack_images(batch, true);
                auto [img1, img2] = model.derain().forward(rainy, true);
                std::vector<Tensor> outputs;
                if (model.derain().config().supervise_stage1) outputs.push_back(img1);
                outputs.push_back(img2);
                derain_part = l_derain(3, clean, outputs, {}, sc.mse_enabled);
                DetectorOutput out = model.detector().forward(img2);
                AssignedBatch targets = assign_batch(gts, grids, model.detector_config());
                dl = downstream_focal_suite(out, targets);
                total = total_loss(3, derain_part, dl.total);
            }

            g.backward(total);
            adam.step(model.params());
            ++global_step;

            log.total += total.item();
            if (derain_part.defined()) log.derain += derain_part.item();
            if (dl.total.defined()) {
                log.cls += dl.cls.item();
                log.reg += dl.reg.item();
                log.cnt += dl.cnt.item();
            }
            if (stage == 2 && downstream.defined()) log.fml += downstream.item();
            ++log.steps;
        }
        if (log.steps > 0) {
            log.total /= log.steps;
            log.derain /= log.steps;
            log.cls /= log.steps;
            log.reg /= log.steps;
            log.cnt /= log.steps;
            log.fml /= log.steps;
        }
        result.logs.push_back(log);
    }

    result.checkpoint = model.snapshot();
    result.checkpoint.has_optimizer = true;
    result.checkpoint.optimizer_step = adam.step_count();
    result.checkpoint.optimizer_config = adam.config();
    for (const auto& s : adam.slots()) {
        Checkpoint::OptimizerSlot slot;
        slot.name = s.name;
        slot.m.assign(s.m.begin(), s.m.end());
        slot.v.assign(s.v.begin(), s.v.end());
        result.checkpoint.optimizer_slots.push_back(std::move(slot));
    }
    result.checkpoint.stage = stage;
    result.checkpoint.epoch = sc.epochs;
    result.checkpoint.global_step = global_step;
    result.checkpoint.config_checksum = config_checksum(cfg);
    return result;
}

std::string epoch_log_json(const EpochLog& log) {
    nlohmann::json j;
    j["stage"] = log.stage;
    j["epoch"] = log.epoch;
    j["lr"] = log.lr;
    j["loss_total"] = log.total;
    j["loss_derain"] = log.derain;
    j["loss_cls"] = log.cls;
    j["loss_reg"] = log.reg;
    j["loss_cnt"] = log.cnt;
    j["loss_fml"] = log.fml;
    j["steps"] = log.steps;
    return j.dump();
}

}  // namespace cdrn
