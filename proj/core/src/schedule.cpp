#include "bwn/schedule.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "bwn/layers.hpp"

namespace bwn {

std::vector<std::size_t> make_order(OrderKind kind, std::size_t layer_count, std::uint64_t seed,
                                    const std::vector<std::size_t>* explicit_order) {
  if (layer_count < 1) throw config_error("make_order: layer count must be at least 1");
  std::vector<std::size_t> order(layer_count);
  switch (kind) {
    case OrderKind::forward:
      for (std::size_t i = 0; i < layer_count; ++i) order[i] = i + 1;
      break;
    case OrderKind::reverse:
      for (std::size_t i = 0; i < layer_count; ++i) order[i] = layer_count - i;
      break;
    case OrderKind::random: {
      for (std::size_t i = 0; i < layer_count; ++i) order[i] = i + 1;
      Rng rng(seed);
      rng.shuffle(order.begin(), order.end());
      break;
    }
    case OrderKind::explicit_order:
      if (!explicit_order) throw config_error("make_order: explicit kind needs an order");
      order = *explicit_order;
      validate_order(order, layer_count);
      break;
  }
  return order;
}

void validate_order(const std::vector<std::size_t>& order, std::size_t layer_count) {
  if (order.size() != layer_count)
    throw config_error("order " + order_to_string(order) + " has " +
                       std::to_string(order.size()) + " entries for " +
                       std::to_string(layer_count) + " layers");
  std::vector<bool> seen(layer_count, false);
  for (std::size_t v : order) {
    if (v < 1 || v > layer_count || seen[v - 1])
      throw config_error("order " + order_to_string(order) + " is not a permutation of 1.." +
                         std::to_string(layer_count));
    seen[v - 1] = true;
  }
}

std::string order_to_string(const std::vector<std::size_t>& order) {
  std::string s;
  for (std::size_t v : order) s += std::to_string(v);
  return s;
}

double lr_at(std::size_t epoch, double lr0, const std::vector<LrMilestone>& milestones) {
  if (epoch < 1) throw config_error("lr_at: epochs are 1-based");
  double lr = lr0;
  for (const LrMilestone& m : milestones)
    if (m.epoch <= epoch) lr *= m.factor;
  return lr;
}

void TrainPlan::validate(std::size_t layer_count) const {
  if (binarize) validate_order(order, layer_count);
  if (total_epochs < layer_count * epochs_per_layer)
    throw config_error("plan: total epochs " + std::to_string(total_epochs) +
                       " is less than layers*epochs_per_layer = " +
                       std::to_string(layer_count * epochs_per_layer));
  if (batch_size < 1) throw config_error("plan: batch size must be at least 1");
  if (!(lr0 > 0)) throw config_error("plan: lr0 must be positive");
  std::size_t prev = 0;
  for (const LrMilestone& m : lr_milestones) {
    if (m.epoch <= prev) throw config_error("plan: lr milestones must be strictly increasing");
    if (!(m.factor > 0)) throw config_error("plan: lr milestone factors must be positive");
    prev = m.epoch;
  }
}

namespace {

std::size_t argmax_row(const Tensor<float>& logits, std::size_t row) {
  const std::size_t classes = logits.dim(1);
  std::size_t best = 0;
  for (std::size_t c = 1; c < classes; ++c)
    if (logits.at2(row, c) > logits.at2(row, best)) best = c;
  return best;
}

}  // namespace

double evaluate_error(Network<float>& net, const BinarizationState& state, const Dataset& data,
                      std::size_t eval_batch) {
  std::vector<Tensor<float>> effective = apply_binarization(net, state);
  std::size_t wrong = 0;
  const std::size_t n = data.size();
  for (std::size_t begin = 0; begin < n; begin += eval_batch) {
    const std::size_t count = std::min(eval_batch, n - begin);
    const std::size_t dim = data.input_dim();
    Tensor<float> x({count, dim});
    std::copy(data.images.data.begin() + begin * dim,
              data.images.data.begin() + (begin + count) * dim, x.data.begin());
    Tensor<float> logits = net.forward(x, &effective, /*train=*/false, nullptr);
    for (std::size_t i = 0; i < count; ++i)
      if (static_cast<int>(argmax_row(logits, i)) != data.labels[begin + i]) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(n);
}

std::optional<double> train_one_epoch(Network<float>& net, Optimizer<float>& opt,
                                      const BinarizationState& state, const Dataset& train,
                                      std::size_t batch_size, std::uint64_t seed,
                                      std::size_t epoch, double lr) {
  BatchStream stream(train, batch_size, seed, epoch);
  Batch batch;
  std::vector<Tensor<float>> effective;
  ForwardCache<float> cache;
  std::size_t wrong = 0, seen = 0;
  while (stream.next(batch)) {
    apply_binarization_into(net, state, effective);
    Tensor<float> logits = net.forward(batch.x, &effective, /*train=*/true, &cache);
    LossGrad<float> loss = softmax_cross_entropy(logits, batch.y);
    if (!std::isfinite(loss.loss)) return std::nullopt;
    for (std::size_t i = 0; i < batch.size(); ++i)
      if (static_cast<int>(argmax_row(logits, i)) != batch.y[i]) ++wrong;
    seen += batch.size();
    Gradients<float> grads = net.backward(cache, &effective, loss.dlogits);
    opt.step(net, ste_route_gradients(grads), lr);
  }
  return static_cast<double>(wrong) / static_cast<double>(seen);
}

RunResult run_iterative(const TrainPlan& plan, Network<float> net, const DataBundle& data) {
  const std::size_t layer_count = net.weight_layer_count();
  plan.validate(layer_count);

  RunResult result;
  Optimizer<float> opt(plan.optimizer, net);
  BinarizationState state = BinarizationState::none(layer_count);

  const auto run_start = std::chrono::steady_clock::now();
  std::size_t epoch = 1;
  std::size_t next_flip = 0;  // index into plan.order

  // Flag flips happen at the start of an iteration's first epoch: layer
  // order[j] is flipped at epoch j*N + 1. With epochs_per_layer = 0 every
  // flag is set before the first epoch (binary baseline); with
  // binarize = false none ever is (float baseline).
  auto advance_flags = [&]() {
    if (!plan.binarize) return;
    if (plan.epochs_per_layer == 0) {
      for (; next_flip < layer_count; ++next_flip) state.set(plan.order[next_flip]);
      return;
    }
    if (next_flip < layer_count && epoch == next_flip * plan.epochs_per_layer + 1) {
      state.set(plan.order[next_flip]);
      ++next_flip;
    }
  };

  for (; epoch <= plan.total_epochs; ++epoch) {
    advance_flags();
    const double lr = lr_at(epoch, plan.lr0, plan.lr_milestones);
    std::optional<double> train_error =
        train_one_epoch(net, opt, state, *data.train, plan.batch_size, plan.seed, epoch, lr);
    if (!train_error) {
      result.aborted = true;
      result.abort_reason = "non-finite loss at epoch " + std::to_string(epoch);
      break;
    }
    MetricsRecord rec;
    rec.epoch = epoch;
    rec.train_error = *train_error;
    rec.val_error = evaluate_error(net, state, *data.val);
    rec.test_error = evaluate_error(net, state, *data.test);
    rec.state = state;
    rec.lr = lr;
    rec.wall_time_sec =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - run_start).count();
    result.records.push_back(rec);

    const bool eligible = plan.binarize ? state.all_set() : true;
    if (eligible && (!result.best || rec.val_error < result.best->val_error)) {
      Checkpoint ck;
      ck.net = net;
      ck.state = state;
      ck.epoch = epoch;
      ck.val_error = rec.val_error;
      ck.test_error = rec.test_error;
      result.best = std::move(ck);
    }
  }
  result.net = std::move(net);
  return result;
}

std::size_t select_best(const std::vector<MetricsRecord>& records,
                        bool restrict_to_fully_binarized) {
  std::size_t best = records.size();
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (restrict_to_fully_binarized && !records[i].state.all_set()) continue;
    if (best == records.size() || records[i].val_error < records[best].val_error) best = i;
  }
  if (best == records.size())
    throw config_error("select_best: no eligible epochs" +
                       std::string(restrict_to_fully_binarized ? " (none fully binarized)" : ""));
  return best;
}

}  // namespace bwn
