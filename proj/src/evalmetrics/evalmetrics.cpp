#include "endo/evalmetrics/evalmetrics.hpp"

#include "endo/imgcore/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace endo::eval {

namespace {

void check_shapes(const img::ProbMap& a, const img::ProbMap& b) {
    if (a.width() != b.width() || a.height() != b.height()) {
        throw std::invalid_argument("maps differ in shape");
    }
}

// Mean over `from` of the distance to the nearest point of `to`, which must
// be sorted by x. Distances are std::hypot, and every candidate that could
// tie is visited, so each minimum equals the brute-force one bit for bit.
double mean_nearest(const PointSet& from, const PointSet& to) {
    double sum = 0.0;
    for (const auto& p : from) {
        auto it = std::lower_bound(to.begin(), to.end(), p[0], [](const Point& q, double x) { return q[0] < x; });
        double best = std::numeric_limits<double>::infinity();
        for (auto r = it; r != to.end(); ++r) {
            const double dx = (*r)[0] - p[0];
            if (std::abs(dx) > best) break;
            best = std::min(best, std::hypot(dx, (*r)[1] - p[1]));
        }
        for (auto r = it; r != to.begin();) {
            --r;
            const double dx = (*r)[0] - p[0];
            if (std::abs(dx) > best) break;
            best = std::min(best, std::hypot(dx, (*r)[1] - p[1]));
        }
        sum += best;
    }
    return sum / static_cast<double>(from.size());
}

// y ~ a * exp(b * t) (+ c when with_offset), fitted on t in [0, 1].
struct ExpFit {
    double a = 0.0, b = 0.0, c = 0.0, rss = 0.0;
};

double rss_of(const ExpFit& f, const std::vector<double>& t, const std::vector<double>& y) {
    double s = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        const double r = y[i] - (f.a * std::exp(f.b * t[i]) + f.c);
        s += r * r;
    }
    return s;
}

// Linear part for a fixed rate.
ExpFit solve_linear(double b, const std::vector<double>& t, const std::vector<double>& y, bool with_offset) {
    ExpFit f;
    f.b = b;
    const auto n = static_cast<Eigen::Index>(t.size());
    if (with_offset) {
        Eigen::MatrixXd A(n, 2);
        Eigen::VectorXd rhs(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            A(i, 0) = std::exp(b * t[static_cast<std::size_t>(i)]);
            A(i, 1) = 1.0;
            rhs(i) = y[static_cast<std::size_t>(i)];
        }
        if (b == 0.0) {
            f.c = rhs.mean();
        } else {
            const Eigen::Vector2d x = A.colPivHouseholderQr().solve(rhs);
            f.a = x(0);
            f.c = x(1);
        }
    } else {
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < t.size(); ++i) {
            const double e = std::exp(b * t[i]);
            num += e * y[i];
            den += e * e;
        }
        f.a = den > 0.0 ? num / den : 0.0;
    }
    f.rss = rss_of(f, t, y);
    return f;
}

ExpFit fit_exponential(const std::vector<double>& t, const std::vector<double>& y, bool with_offset) {
    // Multi-start over the rate on the unit interval.
    ExpFit best;
    best.rss = std::numeric_limits<double>::infinity();
    for (int k = -40; k <= 40; ++k) {
        const ExpFit f = solve_linear(0.25 * k, t, y, with_offset);
        if (f.rss < best.rss) best = f;
    }
    // Damped Gauss-Newton on (a, b[, c]).
    const int np = with_offset ? 3 : 2;
    double lambda = 1e-3;
    for (int it = 0; it < 200; ++it) {
        Eigen::MatrixXd J(static_cast<Eigen::Index>(t.size()), np);
        Eigen::VectorXd r(static_cast<Eigen::Index>(t.size()));
        for (std::size_t i = 0; i < t.size(); ++i) {
            const double e = std::exp(best.b * t[i]);
            const auto row = static_cast<Eigen::Index>(i);
            J(row, 0) = e;
            J(row, 1) = best.a * t[i] * e;
            if (with_offset) J(row, 2) = 1.0;
            r(row) = y[i] - (best.a * e + best.c);
        }
        const Eigen::MatrixXd JtJ = J.transpose() * J;
        const Eigen::VectorXd g = J.transpose() * r;
        bool improved = false;
        for (int tries = 0; tries < 20 && !improved; ++tries) {
            Eigen::MatrixXd H = JtJ;
            for (int d = 0; d < np; ++d) H(d, d) += lambda * (JtJ(d, d) + 1e-12);
            const Eigen::VectorXd step = H.ldlt().solve(g);
            if (!step.allFinite()) break;
            ExpFit cand = best;
            cand.a += step(0);
            cand.b += step(1);
            if (with_offset) cand.c += step(2);
            cand.rss = rss_of(cand, t, y);
            if (std::isfinite(cand.rss) && cand.rss < best.rss) {
                const double gain = best.rss - cand.rss;
                best = cand;
                lambda = std::max(lambda / 10.0, 1e-12);
                improved = true;
                if (gain <= 1e-14 * (1.0 + best.rss)) return best;
            } else {
                lambda *= 10.0;
            }
        }
        if (!improved) break;
    }
    return best;
}

}  // namespace

double pixel_accuracy(const img::ProbMap& pred, const img::ProbMap& target, double threshold) {
    check_shapes(pred, target);
    if (pred.empty()) return 100.0;
    std::size_t agree = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) agree += (pred[i] >= threshold) == (target[i] >= threshold) ? 1 : 0;
    return 100.0 * static_cast<double>(agree) / static_cast<double>(pred.size());
}

double dice(const img::ProbMap& pred, const img::ProbMap& target, double threshold) {
    check_shapes(pred, target);
    std::size_t a = 0, b = 0, both = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const bool p = pred[i] >= threshold;
        const bool q = target[i] >= threshold;
        a += p ? 1 : 0;
        b += q ? 1 : 0;
        both += (p && q) ? 1 : 0;
    }
    if (a + b == 0) return 100.0;
    return 100.0 * 2.0 * static_cast<double>(both) / static_cast<double>(a + b);
}

PointSet foreground_points(const img::ProbMap& map, double threshold) {
    PointSet out;
    for (int y = 0; y < map.height(); ++y) {
        for (int x = 0; x < map.width(); ++x) {
            if (map(x, y) >= threshold) out.push_back({static_cast<double>(x), static_cast<double>(y)});
        }
    }
    return out;
}

double mhd(const PointSet& a, const PointSet& b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("mhd needs two non-empty point sets");
    auto by_x = [](const Point& p, const Point& q) { return p[0] < q[0] || (p[0] == q[0] && p[1] < q[1]); };
    PointSet sa = a;
    PointSet sb = b;
    std::sort(sa.begin(), sa.end(), by_x);
    std::sort(sb.begin(), sb.end(), by_x);
    return std::max(mean_nearest(a, sb), mean_nearest(b, sa));
}

MetricRecord evaluate_maps(const img::ProbMap& pred, const img::ProbMap& target) {
    MetricRecord r;
    r.accuracy = pixel_accuracy(pred, target);
    r.dice = dice(pred, target);
    const auto pa = foreground_points(pred);
    const auto pb = foreground_points(target);
    if (!pa.empty() && !pb.empty()) r.mhd = mhd(pa, pb);
    return r;
}

MaeMape mae_mape(std::span<const std::optional<double>> estimates, std::span<const double> truths) {
    if (estimates.size() != truths.size()) throw std::invalid_argument("estimates and truths differ in length");
    MaeMape out;
    double abs_sum = 0.0;
    double pct_sum = 0.0;
    for (std::size_t i = 0; i < truths.size(); ++i) {
        if (truths[i] == 0.0) throw std::invalid_argument("MAPE needs nonzero truths");
        if (!estimates[i]) {
            ++out.n_missing;
            pct_sum += 100.0;
            continue;
        }
        ++out.n_present;
        const double e = std::abs(*estimates[i] - truths[i]);
        abs_sum += e;
        pct_sum += 100.0 * e / std::abs(truths[i]);
    }
    if (out.n_present > 0) out.mae = abs_sum / static_cast<double>(out.n_present);
    if (!truths.empty()) out.mape = pct_sum / static_cast<double>(truths.size());
    return out;
}

MaeMape mae_mape(std::span<const double> estimates, std::span<const double> truths) {
    std::vector<std::optional<double>> e(estimates.begin(), estimates.end());
    return mae_mape(std::span<const std::optional<double>>(e), truths);
}

BlandAltman bland_altman(std::span<const double> estimates, std::span<const double> truths) {
    if (estimates.size() != truths.size()) throw std::invalid_argument("estimates and truths differ in length");
    if (estimates.size() < 3) throw std::invalid_argument("Bland-Altman needs at least three pairs");
    BlandAltman ba;
    ba.n = estimates.size();
    std::vector<double> d(ba.n);
    for (std::size_t i = 0; i < ba.n; ++i) d[i] = estimates[i] - truths[i];
    ba.bias = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(ba.n);
    double ss = 0.0;
    for (double v : d) ss += (v - ba.bias) * (v - ba.bias);
    ba.sd = std::sqrt(ss / static_cast<double>(ba.n - 1));
    ba.lower = ba.bias - 1.96 * ba.sd;
    ba.upper = ba.bias + 1.96 * ba.sd;
    ba.degenerate = ba.sd == 0.0;
    std::size_t inside = 0;
    for (double v : d) {
        // With zero spread the limits are the bias itself; compare the deviation instead.
        const bool in = ba.degenerate ? std::abs(v - ba.bias) <= 1e-12 * (1.0 + std::abs(ba.bias))
                                      : (v >= ba.lower && v <= ba.upper);
        inside += in ? 1 : 0;
    }
    ba.within_fraction = static_cast<double>(inside) / static_cast<double>(ba.n);
    return ba;
}

double ErrorModel::mean_at(double n) const { return mean_a * std::exp(mean_b * n) + mean_c; }
double ErrorModel::sd_at(double n) const { return sd_a * std::exp(sd_b * n); }

ErrorModel fit_error_model(std::span<const double> errors, std::span<const double> cell_counts,
                           const ErrorModelOptions& options) {
    if (errors.size() != cell_counts.size()) throw std::invalid_argument("errors and cell counts differ in length");
    if (errors.size() < 10) throw std::invalid_argument("error model needs at least 10 points");
    if (!(options.bin_width > 0.0 && options.bin_step > 0.0)) throw std::invalid_argument("bad bin options");
    for (double n : cell_counts) {
        if (!(n > 0.0)) throw std::invalid_argument("cell counts must be positive");
    }
    const auto [lo_it, hi_it] = std::minmax_element(cell_counts.begin(), cell_counts.end());
    const double n_lo = *lo_it;
    const double span = std::max(*hi_it - n_lo, 1.0);

    // Rates are fitted on t = (n - n_lo) / span and mapped back afterwards.
    std::vector<double> t(errors.size());
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = (cell_counts[i] - n_lo) / span;
    const std::vector<double> y(errors.begin(), errors.end());
    const ExpFit mf = fit_exponential(t, y, true);

    std::vector<double> bt;
    std::vector<double> bsd;
    for (double lo = std::floor(n_lo); lo <= *hi_it; lo += options.bin_step) {
        double sum_n = 0.0, sum = 0.0;
        std::vector<double> in;
        for (std::size_t i = 0; i < errors.size(); ++i) {
            if (cell_counts[i] >= lo && cell_counts[i] < lo + options.bin_width) {
                in.push_back(errors[i]);
                sum_n += cell_counts[i];
                sum += errors[i];
            }
        }
        if (in.size() < options.min_bin_samples) continue;
        const double m = sum / static_cast<double>(in.size());
        double ss = 0.0;
        for (double e : in) ss += (e - m) * (e - m);
        bt.push_back((sum_n / static_cast<double>(in.size()) - n_lo) / span);
        bsd.push_back(std::sqrt(ss / static_cast<double>(in.size() - 1)));
    }
    if (bt.size() < 3) {
        throw Fault("error model: only " + std::to_string(bt.size()) + " cell-count bins have enough samples");
    }
    const ExpFit sf = fit_exponential(bt, bsd, false);

    ErrorModel m;
    m.mean_b = mf.b / span;
    m.mean_a = mf.a * std::exp(-mf.b * n_lo / span);
    m.mean_c = mf.c;
    m.sd_b = sf.b / span;
    m.sd_a = sf.a * std::exp(-sf.b * n_lo / span);
    m.mean_rss = mf.rss;
    m.sd_rss = sf.rss;
    m.n_bins = bt.size();
    const bool finite = std::isfinite(m.mean_a) && std::isfinite(m.mean_b) && std::isfinite(m.mean_c) &&
                        std::isfinite(m.sd_a) && std::isfinite(m.sd_b);
    if (!finite) {
        std::ostringstream os;
        os << "error model did not converge (mean rss " << mf.rss << ", sd rss " << sf.rss << ")";
        throw Fault(os.str());
    }
    return m;
}

std::string error_model_plot_csv(const ErrorModel& model, double n_min, double n_max, int steps) {
    if (steps < 2) throw std::invalid_argument("plot needs at least two steps");
    std::ostringstream os;
    os.precision(10);
    os << "n,mean,lower,upper\n";
    for (int i = 0; i < steps; ++i) {
        const double n = n_min + (n_max - n_min) * i / (steps - 1);
        const double mu = model.mean_at(n);
        const double sd = model.sd_at(n);
        os << n << ',' << mu << ',' << mu - 2.0 * sd << ',' << mu + 2.0 * sd << '\n';
    }
    return os.str();
}

double success_rate(std::span<const std::optional<bio::BiomarkerReport>> reports) {
    if (reports.empty()) return 0.0;
    const auto present = std::count_if(reports.begin(), reports.end(), [](const auto& r) { return r.has_value(); });
    return 100.0 * static_cast<double>(present) / static_cast<double>(reports.size());
}

}  // namespace endo::eval
