#include "endo/fnlanet/train.hpp"

#include "endo/imgcore/error.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace endo::nn {

TrainConfig TrainConfig::for_role(const std::string& role) {
    TrainConfig cfg;
    if (role == "edge") {
        cfg.lr_decay = 0.99;
        cfg.epochs = 200;
    } else if (role == "body" || role == "blob" || role == "roi") {
        cfg.lr_decay = 0.97;
        cfg.epochs = 100;
    } else {
        throw std::invalid_argument("unknown target role '" + role + "'");
    }
    return cfg;
}

void TrainConfig::validate() const {
    if (!(initial_lr >= 0.0) || !(lr_decay > 0.0)) throw std::invalid_argument("learning rate settings must be positive");
    if (epochs < 0 || batch_size < 1) throw std::invalid_argument("epochs and batch_size must be positive");
    if (guttae_per_batch < 0 || guttae_per_batch > batch_size) throw std::invalid_argument("guttae quota exceeds the batch");
    if (elastic_grid < 2 || !(elastic_sigma >= 0.0)) throw std::invalid_argument("bad elastic deformation settings");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(adam_eps > 0.0)) {
        throw std::invalid_argument("bad Nadam constants");
    }
}

double learning_rate(const TrainConfig& cfg, int epoch) { return cfg.initial_lr * std::pow(cfg.lr_decay, epoch); }

int complexity_level(int total_grade) {
    if (total_grade <= 2) return 0;
    if (total_grade <= 4) return 1;
    return 2;
}

namespace {

// Moves k random elements of `pool` (without replacement) into `out`.
void draw(std::vector<std::size_t>& pool, std::size_t k, std::vector<std::size_t>& out, std::mt19937_64& rng) {
    for (std::size_t i = 0; i < k && !pool.empty(); ++i) {
        std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
        const std::size_t j = pick(rng);
        out.push_back(pool[j]);
        pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(j));
    }
}

}  // namespace

std::vector<std::size_t> make_batch_indices(const std::vector<TrainingSample>& data, const TrainConfig& cfg,
                                            std::mt19937_64& rng) {
    if (data.empty()) throw std::invalid_argument("cannot draw a batch from an empty dataset");
    std::vector<std::size_t> levels[3];
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (data[i].has_guttae) levels[complexity_level(data[i].total_grade)].push_back(i);
    }
    const auto want = static_cast<std::size_t>(cfg.batch_size);
    std::vector<std::size_t> out;
    out.reserve(want);
    const auto per_level = static_cast<std::size_t>(cfg.guttae_per_batch / 3);
    for (auto& level : levels) draw(level, per_level, out, rng);
    std::vector<std::size_t> spare;
    for (auto& level : levels) spare.insert(spare.end(), level.begin(), level.end());
    std::sort(spare.begin(), spare.end());
    const auto quota = std::min(static_cast<std::size_t>(cfg.guttae_per_batch), want);
    if (out.size() < quota) draw(spare, quota - out.size(), out, rng);

    std::vector<char> taken(data.size(), 0);
    for (auto i : out) taken[i] = 1;
    std::vector<std::size_t> rest;
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (!taken[i]) rest.push_back(i);
    }
    if (out.size() < want) draw(rest, want - out.size(), out, rng);
    return out;
}

img::ProbMap flip_lr(const img::ProbMap& m) {
    img::ProbMap out = m;
    for (int y = 0; y < m.height(); ++y) {
        for (int x = 0; x < m.width(); ++x) out(x, y) = m(m.width() - 1 - x, y);
    }
    return out;
}

img::ProbMap flip_ud(const img::ProbMap& m) {
    img::ProbMap out = m;
    for (int y = 0; y < m.height(); ++y) {
        for (int x = 0; x < m.width(); ++x) out(x, y) = m(x, m.height() - 1 - y);
    }
    return out;
}

ElasticField random_elastic_field(int grid, double sigma, std::mt19937_64& rng) {
    if (grid < 2) throw std::invalid_argument("elastic grid needs at least 2 control points per side");
    ElasticField f;
    f.grid = grid;
    const auto n = static_cast<std::size_t>(grid) * static_cast<std::size_t>(grid);
    f.dx.assign(n, 0.0);
    f.dy.assign(n, 0.0);
    if (sigma > 0.0) {
        std::normal_distribution<double> d(0.0, sigma);
        for (std::size_t i = 0; i < n; ++i) {
            f.dx[i] = d(rng);
            f.dy[i] = d(rng);
        }
    }
    return f;
}

namespace {

template <class Get>
double bilinear(double x, double y, int w, int h, Get get) {
    x = std::clamp(x, 0.0, static_cast<double>(w - 1));
    y = std::clamp(y, 0.0, static_cast<double>(h - 1));
    const int x0 = std::min(static_cast<int>(x), std::max(w - 2, 0));
    const int y0 = std::min(static_cast<int>(y), std::max(h - 2, 0));
    const int x1 = std::min(x0 + 1, w - 1);
    const int y1 = std::min(y0 + 1, h - 1);
    const double fx = x - x0;
    const double fy = y - y0;
    const double top = get(x0, y0) * (1.0 - fx) + get(x1, y0) * fx;
    const double bot = get(x0, y1) * (1.0 - fx) + get(x1, y1) * fx;
    return top * (1.0 - fy) + bot * fy;
}

}  // namespace

img::ProbMap elastic_deform(const img::ProbMap& m, const ElasticField& field) {
    const int g = field.grid;
    if (g < 2 || field.dx.size() != static_cast<std::size_t>(g * g) || field.dy.size() != field.dx.size()) {
        throw std::invalid_argument("malformed elastic field");
    }
    img::ProbMap out = m;
    const int w = m.width();
    const int h = m.height();
    if (w == 0 || h == 0) return out;
    const double sx = w > 1 ? static_cast<double>(g - 1) / (w - 1) : 0.0;
    const double sy = h > 1 ? static_cast<double>(g - 1) / (h - 1) : 0.0;
    const auto at = [g](const std::vector<double>& v) {
        return [&v, g](int i, int j) { return v[static_cast<std::size_t>(j) * g + i]; };
    };
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double dx = bilinear(x * sx, y * sy, g, g, at(field.dx));
            const double dy = bilinear(x * sx, y * sy, g, g, at(field.dy));
            out(x, y) = bilinear(x + dx, y + dy, w, h, [&m](int i, int j) { return m(i, j); });
        }
    }
    return out;
}

Batch make_batch(const std::vector<TrainingSample>& data, const TrainConfig& cfg, std::mt19937_64& rng) {
    Batch b;
    b.indices = make_batch_indices(data, cfg, rng);
    std::vector<img::ProbMap> images, targets;
    for (auto i : b.indices) {
        img::ProbMap im = data[i].image;
        img::ProbMap t = data[i].target;
        if (!im.same_shape(t)) throw std::invalid_argument("image and target differ in size");
        if (cfg.augment) {
            std::bernoulli_distribution coin(0.5);
            if (coin(rng)) {
                im = flip_lr(im);
                t = flip_lr(t);
            }
            if (coin(rng)) {
                im = flip_ud(im);
                t = flip_ud(t);
            }
            const ElasticField f = random_elastic_field(cfg.elastic_grid, cfg.elastic_sigma, rng);
            im = elastic_deform(im, f);
            t = elastic_deform(t, f);
        }
        images.push_back(std::move(im));
        targets.push_back(std::move(t));
    }
    b.images = stack_maps(images);
    b.targets = stack_maps(targets);
    return b;
}

void nadam_step(ParamStore& store, double lr, const TrainConfig& cfg) {
    ++store.step;
    const auto t = static_cast<double>(store.step);
    const double b1 = cfg.beta1;
    const double b2 = cfg.beta2;
    const double c1 = 1.0 - std::pow(b1, t + 1.0);
    const double c1_now = 1.0 - std::pow(b1, t);
    const double c2 = 1.0 - std::pow(b2, t);
    for (auto& p : store.all()) {
        if (!p.trainable) continue;
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double g = p.grad[i];
            p.m[i] = b1 * p.m[i] + (1.0 - b1) * g;
            p.v[i] = b2 * p.v[i] + (1.0 - b2) * g * g;
            const double m_hat = b1 * p.m[i] / c1 + (1.0 - b1) * g / c1_now;
            const double v_hat = p.v[i] / c2;
            p.value[i] -= lr * m_hat / (std::sqrt(v_hat) + cfg.adam_eps);
        }
    }
}

double backward_and_step(Network& net, const Tensor4& images, const Tensor4& targets, double lr, const TrainConfig& cfg) {
    Tape tape(&net.params());
    const Var x = tape.constant(images);
    const Var loss = tape.softmax_cross_entropy(net.logits(tape, x, true), targets);
    const double value = tape.value(loss).data[0];
    if (!std::isfinite(value)) throw Fault("non-finite training loss");
    net.params().zero_grad();
    tape.backward(loss);
    nadam_step(net.params(), lr, cfg);
    return value;
}

std::vector<EpochRecord> train(Network& net, const std::vector<TrainingSample>& data, const TrainConfig& cfg,
                               const std::function<bool(const EpochRecord&)>& on_epoch) {
    cfg.validate();
    if (data.empty()) throw std::invalid_argument("cannot train on an empty dataset");
    std::mt19937_64 rng(cfg.seed);
    const int batches = static_cast<int>((data.size() + static_cast<std::size_t>(cfg.batch_size) - 1) /
                                         static_cast<std::size_t>(cfg.batch_size));
    std::vector<EpochRecord> log;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto start = std::chrono::steady_clock::now();
        EpochRecord rec;
        rec.epoch = epoch;
        rec.learning_rate = learning_rate(cfg, epoch);
        rec.batches = batches;
        double sum = 0.0;
        for (int b = 0; b < batches; ++b) {
            const Batch batch = make_batch(data, cfg, rng);
            try {
                sum += backward_and_step(net, batch.images, batch.targets, rec.learning_rate, cfg);
            } catch (const Fault& f) {
                throw Fault("epoch " + std::to_string(epoch) + ": " + f.what());
            }
        }
        rec.loss = sum / batches;
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        log.push_back(rec);
        if (on_epoch && !on_epoch(rec)) break;
    }
    return log;
}

}  // namespace endo::nn
