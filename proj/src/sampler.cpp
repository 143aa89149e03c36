#include "hazspline/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <stdexcept>
#include <mutex>
#include <thread>

#include "hazspline/stats.hpp"

namespace hazspline {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kMaxDeltaH = 1000.0;

struct DualAveraging {
    double mu = 0.0, delta = 0.9, gamma = 0.05, kappa = 0.75, t0 = 10.0;
    double counter = 0.0, s_bar = 0.0, x_bar = 0.0;

    void restart() { counter = s_bar = x_bar = 0.0; }

    double learn(double accept) {
        ++counter;
        accept = std::min(1.0, accept);
        const double eta = 1.0 / (counter + t0);
        s_bar = (1.0 - eta) * s_bar + eta * (delta - accept);
        const double x = mu - s_bar * std::sqrt(counter) / gamma;
        const double x_eta = std::pow(counter, -kappa);
        x_bar = (1.0 - x_eta) * x_bar + x_eta * x;
        return std::exp(x);
    }
};

// Warmup schedule: a fast initial buffer, doubling slow windows for the
// metric, and a final fast buffer.
class Windows {
public:
    explicit Windows(std::size_t warmup) : n_(warmup) {
        if (warmup < 20) {
            enabled_ = false;
            return;
        }
        if (init_ + base_ + term_ > warmup) {
            init_ = static_cast<std::size_t>(0.15 * warmup);
            term_ = static_cast<std::size_t>(0.1 * warmup);
            base_ = warmup - (init_ + term_);
        }
        size_ = base_;
        next_ = init_ + size_ - 1;
    }

    // Returns true when a metric window closes after this iteration.
    bool step(bool& collect) {
        collect = enabled_ && counter_ >= init_ && counter_ < n_ - term_ && counter_ != n_;
        const bool end = enabled_ && counter_ == next_ && counter_ != n_;
        if (end) advance();
        ++counter_;
        return end;
    }

private:
    void advance() {
        if (next_ == n_ - term_ - 1) return;
        size_ *= 2;
        next_ = counter_ + size_;
        if (next_ != n_ - term_ - 1) {
            const std::size_t boundary = next_ + 2 * size_;
            if (boundary >= n_ - term_) next_ = n_ - term_ - 1;
        }
    }

    std::size_t n_;
    std::size_t init_ = 75, term_ = 50, base_ = 25;
    std::size_t size_ = 0, next_ = 0, counter_ = 0;
    bool enabled_ = true;
};

struct Welford {
    std::size_t n = 0;
    Eigen::VectorXd mean, m2;

    void reset(Eigen::Index d) {
        n = 0;
        mean = Eigen::VectorXd::Zero(d);
        m2 = Eigen::VectorXd::Zero(d);
    }
    void add(const Eigen::VectorXd& x) {
        ++n;
        const Eigen::VectorXd delta = x - mean;
        mean += delta / static_cast<double>(n);
        m2 += delta.cwiseProduct(x - mean);
    }
    [[nodiscard]] Eigen::VectorXd variance() const { return m2 / (static_cast<double>(n) - 1.0); }
};

// Regularised toward a small multiple of the identity.
Eigen::VectorXd regularised_variance(const Welford& w) {
    const double n = static_cast<double>(w.n);
    return (n / (n + 5.0)) * w.variance().array() + 1e-3 * (5.0 / (n + 5.0));
}

struct PhasePoint {
    Eigen::VectorXd q, p, grad;
    double logp = -kInf;
};

class Nuts {
public:
    Nuts(const LogDensity& target, Eigen::Index dim, std::mt19937_64& rng, int max_depth)
        : inv_metric_(Eigen::VectorXd::Ones(dim)), target_(target), rng_(rng), max_depth_(max_depth) {}

    void init(const Eigen::VectorXd& q) {
        z_.q = q;
        evaluate(z_);
    }

    double evaluate(PhasePoint& z) {
        z.logp = target_(z.q, z.grad);
        ++grad_evals_;
        if (std::isnan(z.logp)) z.logp = -kInf;
        return z.logp;
    }

    double kinetic(const Eigen::VectorXd& p) const { return 0.5 * p.dot(inv_metric_.cwiseProduct(p)); }
    double hamiltonian(const PhasePoint& z) const { return -z.logp + kinetic(z.p); }

    void sample_momentum(PhasePoint& z) {
        z.p.resize(z.q.size());
        for (Eigen::Index i = 0; i < z.p.size(); ++i) z.p[i] = normal_(rng_) / std::sqrt(inv_metric_[i]);
    }

    void leapfrog(PhasePoint& z, double eps) {
        z.p += 0.5 * eps * z.grad;
        z.q += eps * inv_metric_.cwiseProduct(z.p);
        evaluate(z);
        if (std::isfinite(z.logp)) z.p += 0.5 * eps * z.grad;
    }

    // Doubles or halves the step until the one-step acceptance crosses 0.8.
    void init_stepsize() {
        const PhasePoint start = z_;
        auto delta_h = [&]() {
            PhasePoint z = start;
            sample_momentum(z);
            const double h0 = hamiltonian(z);
            leapfrog(z, eps_);
            double h = hamiltonian(z);
            if (std::isnan(h)) h = kInf;
            return h0 - h;
        };
        const double log08 = std::log(0.8);
        const int direction = delta_h() > log08 ? 1 : -1;
        for (int iter = 0; iter < 200; ++iter) {
            const double dh = delta_h();
            if (direction == 1 && !(dh > log08)) break;
            if (direction == -1 && !(dh < log08)) break;
            eps_ = direction == 1 ? 2.0 * eps_ : 0.5 * eps_;
            if (eps_ > 1e7) throw std::runtime_error("step size diverged during initialisation: posterior may be improper");
            if (eps_ == 0.0) throw std::runtime_error("step size collapsed to zero during initialisation");
        }
        z_ = start;
    }

    struct Transition {
        double accept = 0.0;
        bool divergent = false;
        int depth = 0;
    };

    Transition transition() {
        sample_momentum(z_);
        PhasePoint z_fwd = z_, z_bck = z_;
        PhasePoint z_sample = z_, z_propose = z_;
        const Eigen::Index d = z_.q.size();

        Eigen::VectorXd p_fwd_fwd = z_.p, p_sharp_fwd_fwd = inv_metric_.cwiseProduct(z_.p);
        Eigen::VectorXd p_fwd_bck = z_.p, p_sharp_fwd_bck = p_sharp_fwd_fwd;
        Eigen::VectorXd p_bck_fwd = z_.p, p_sharp_bck_fwd = p_sharp_fwd_fwd;
        Eigen::VectorXd p_bck_bck = z_.p, p_sharp_bck_bck = p_sharp_fwd_fwd;
        Eigen::VectorXd rho = z_.p;

        double log_sum_weight = 0.0;
        const double h0 = hamiltonian(z_);
        n_leapfrog_ = 0;
        sum_metro_ = 0.0;
        divergent_ = false;
        int depth = 0;

        while (depth < max_depth_) {
            Eigen::VectorXd rho_fwd = Eigen::VectorXd::Zero(d), rho_bck = Eigen::VectorXd::Zero(d);
            bool valid = false;
            double lsw_subtree = -kInf;
            if (unif_(rng_) > 0.5) {
                rho_bck = rho;
                p_bck_fwd = p_fwd_bck;
                p_sharp_bck_fwd = p_sharp_fwd_bck;
                valid = build_tree(depth, z_fwd, z_propose, p_sharp_fwd_bck, p_sharp_fwd_fwd, rho_fwd, p_fwd_bck,
                                   p_fwd_fwd, h0, 1.0, lsw_subtree);
            } else {
                rho_fwd = rho;
                p_fwd_bck = p_bck_fwd;
                p_sharp_fwd_bck = p_sharp_bck_fwd;
                valid = build_tree(depth, z_bck, z_propose, p_sharp_bck_fwd, p_sharp_bck_bck, rho_bck, p_bck_fwd,
                                   p_bck_bck, h0, -1.0, lsw_subtree);
            }
            if (!valid) break;
            ++depth;
            if (lsw_subtree > log_sum_weight) {
                z_sample = z_propose;
            } else if (unif_(rng_) < std::exp(lsw_subtree - log_sum_weight)) {
                z_sample = z_propose;
            }
            log_sum_weight = log_sum_exp(log_sum_weight, lsw_subtree);
            rho = rho_bck + rho_fwd;
            bool persist = criterion(p_sharp_bck_bck, p_sharp_fwd_fwd, rho);
            persist = persist && criterion(p_sharp_bck_bck, p_sharp_fwd_bck, rho_bck + p_fwd_bck);
            persist = persist && criterion(p_sharp_bck_fwd, p_sharp_fwd_fwd, rho_fwd + p_bck_fwd);
            if (!persist) break;
        }
        z_ = z_sample;
        Transition t;
        t.accept = n_leapfrog_ > 0 ? sum_metro_ / static_cast<double>(n_leapfrog_) : 0.0;
        t.divergent = divergent_;
        t.depth = depth;
        return t;
    }

    PhasePoint z_;
    double eps_ = 1.0;
    Eigen::VectorXd inv_metric_;
    std::size_t grad_evals_ = 0;

private:
    static bool criterion(const Eigen::VectorXd& p_sharp_minus, const Eigen::VectorXd& p_sharp_plus,
                          const Eigen::VectorXd& rho) {
        return p_sharp_plus.dot(rho) > 0 && p_sharp_minus.dot(rho) > 0;
    }

    // `z` is the trajectory end being extended; it is advanced in place.
    bool build_tree(int depth, PhasePoint& z, PhasePoint& z_propose, Eigen::VectorXd& p_sharp_beg,
                    Eigen::VectorXd& p_sharp_end, Eigen::VectorXd& rho, Eigen::VectorXd& p_beg,
                    Eigen::VectorXd& p_end, double h0, double sign, double& log_sum_weight) {
        if (depth == 0) {
            leapfrog(z, sign * eps_);
            ++n_leapfrog_;
            double h = hamiltonian(z);
            if (std::isnan(h)) h = kInf;
            if (h - h0 > kMaxDeltaH) divergent_ = true;
            log_sum_weight = log_sum_exp(log_sum_weight, h0 - h);
            sum_metro_ += h0 - h > 0 ? 1.0 : std::exp(h0 - h);
            z_propose = z;
            p_sharp_beg = inv_metric_.cwiseProduct(z.p);
            p_sharp_end = p_sharp_beg;
            rho += z.p;
            p_beg = z.p;
            p_end = p_beg;
            return !divergent_;
        }
        const Eigen::Index d = z.q.size();
        Eigen::VectorXd rho_init = Eigen::VectorXd::Zero(d);
        Eigen::VectorXd p_init_end(d), p_sharp_init_end(d);
        double lsw_init = -kInf;
        if (!build_tree(depth - 1, z, z_propose, p_sharp_beg, p_sharp_init_end, rho_init, p_beg, p_init_end, h0,
                        sign, lsw_init))
            return false;

        PhasePoint z_propose_final = z;
        Eigen::VectorXd rho_final = Eigen::VectorXd::Zero(d);
        Eigen::VectorXd p_final_beg(d), p_sharp_final_beg(d);
        double lsw_final = -kInf;
        if (!build_tree(depth - 1, z, z_propose_final, p_sharp_final_beg, p_sharp_end, rho_final, p_final_beg, p_end,
                        h0, sign, lsw_final))
            return false;

        const double lsw_subtree = log_sum_exp(lsw_init, lsw_final);
        log_sum_weight = log_sum_exp(log_sum_weight, lsw_subtree);
        if (lsw_final > lsw_subtree) {
            z_propose = z_propose_final;
        } else if (unif_(rng_) < std::exp(lsw_final - lsw_subtree)) {
            z_propose = z_propose_final;
        }
        const Eigen::VectorXd rho_subtree = rho_init + rho_final;
        rho += rho_subtree;
        bool persist = criterion(p_sharp_beg, p_sharp_end, rho_subtree);
        persist = persist && criterion(p_sharp_beg, p_sharp_final_beg, rho_init + p_final_beg);
        persist = persist && criterion(p_sharp_init_end, p_sharp_end, rho_final + p_init_end);
        return persist;
    }

    const LogDensity& target_;
    std::mt19937_64& rng_;
    int max_depth_;
    std::size_t n_leapfrog_ = 0;
    double sum_metro_ = 0.0;
    bool divergent_ = false;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> unif_{0.0, 1.0};
};

}  // namespace

void SamplerConfig::validate() const {
    if (chains < 1) throw std::invalid_argument("need at least one chain");
    if (iterations < 1) throw std::invalid_argument("sampling iterations must be positive");
    if (!(target_accept > 0.0 && target_accept < 1.0)) throw std::invalid_argument("target acceptance must be in (0, 1)");
    if (max_depth < 1) throw std::invalid_argument("max tree depth must be positive");
}

ChainResult run_nuts(const LogDensity& target, Eigen::VectorXd init, std::size_t warmup, std::size_t iterations,
                     double target_accept, int max_depth, std::mt19937_64& rng) {
    const Eigen::Index d = init.size();
    Nuts nuts(target, d, rng, max_depth);
    nuts.init(init);
    if (!std::isfinite(nuts.z_.logp)) throw std::runtime_error("initial point has non-finite log density");
    nuts.init_stepsize();

    DualAveraging da;
    da.delta = target_accept;
    da.mu = std::log(10.0 * nuts.eps_);
    Windows windows(warmup);
    Welford welford;
    welford.reset(d);

    ChainResult out;
    out.draws.resize(static_cast<Eigen::Index>(iterations), d);
    double accept_sum = 0.0;
    for (std::size_t it = 0; it < warmup + iterations; ++it) {
        const auto t = nuts.transition();
        if (it < warmup) {
            nuts.eps_ = da.learn(t.accept);
            bool collect = false;
            const bool update = windows.step(collect);
            if (collect) welford.add(nuts.z_.q);
            if (update) {
                nuts.inv_metric_ = regularised_variance(welford);
                welford.reset(d);
                nuts.init_stepsize();
                da.mu = std::log(10.0 * nuts.eps_);
                da.restart();
            }
            if (it + 1 == warmup) nuts.eps_ = std::exp(da.x_bar);
        } else {
            out.draws.row(static_cast<Eigen::Index>(it - warmup)) = nuts.z_.q.transpose();
            accept_sum += t.accept;
            if (t.divergent) ++out.stats.divergences;
            if (t.depth >= max_depth) ++out.stats.max_depth_hits;
        }
    }
    out.stats.step_size = nuts.eps_;
    out.stats.mean_accept = accept_sum / static_cast<double>(iterations);
    out.stats.gradient_evals = nuts.grad_evals_;
    out.stats.inv_metric = nuts.inv_metric_;
    return out;
}

ChainResult run_rwm(const LogDensity& target, Eigen::VectorXd init, std::size_t warmup, std::size_t iterations,
                    std::mt19937_64& rng) {
    const Eigen::Index d = init.size();
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Eigen::VectorXd grad;
    Eigen::VectorXd q = std::move(init);
    double logp = target(q, grad);
    if (!std::isfinite(logp)) throw std::runtime_error("initial point has non-finite log density");

    Eigen::VectorXd scale = Eigen::VectorXd::Constant(d, 0.1);
    double log_step = std::log(2.38 / std::sqrt(static_cast<double>(d)));
    Welford welford;
    welford.reset(d);
    ChainResult out;
    out.draws.resize(static_cast<Eigen::Index>(iterations), d);
    double accept_sum = 0.0;
    std::size_t evals = 1;
    for (std::size_t it = 0; it < warmup + iterations; ++it) {
        Eigen::VectorXd prop(d);
        const double step = std::exp(log_step);
        for (Eigen::Index i = 0; i < d; ++i) prop[i] = q[i] + step * scale[i] * normal(rng);
        const double lp = target(prop, grad);
        ++evals;
        const double a = std::isfinite(lp) ? std::min(1.0, std::exp(lp - logp)) : 0.0;
        if (unif(rng) < a) {
            q = prop;
            logp = lp;
        }
        if (it < warmup) {
            log_step += (a - 0.234) / std::pow(static_cast<double>(it + 1), 0.6);
            welford.add(q);
            // Refresh the proposal shape at doubling checkpoints.
            if (welford.n >= 50 && (welford.n & (welford.n - 1)) == 0)
                scale = regularised_variance(welford).cwiseSqrt();
        } else {
            out.draws.row(static_cast<Eigen::Index>(it - warmup)) = q.transpose();
            accept_sum += a;
        }
    }
    out.stats.step_size = std::exp(log_step);
    out.stats.mean_accept = accept_sum / static_cast<double>(iterations);
    out.stats.gradient_evals = evals;
    out.stats.inv_metric = scale.cwiseAbs2();
    return out;
}

std::mt19937_64 chain_rng(std::uint64_t seed, std::size_t chain) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(chain), 0x68617a73u};
    return std::mt19937_64(seq);
}

std::size_t thread_count(std::size_t requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("HAZSPLINE_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && v > 0) return static_cast<std::size_t>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

PosteriorDraws sample_posterior(const SurvivalModel& model, const SamplerConfig& config) {
    config.validate();
    const std::size_t nc = config.chains;
    std::vector<ChainResult> results(nc);
    std::vector<std::string> errors(nc);

    const LogDensity target = [&model](const Eigen::VectorXd& th, Eigen::VectorXd& g) {
        return model.log_posterior(th, g);
    };
    auto run_chain = [&](std::size_t c) {
        try {
            auto rng = chain_rng(config.seed, c);
            Eigen::VectorXd init;
            Eigen::VectorXd g;
            bool ok = false;
            for (std::size_t a = 0; a < config.init_attempts && !ok; ++a) {
                init = model.initial_point(rng);
                const double lp = model.log_posterior(init, g);
                ok = std::isfinite(lp) && g.allFinite();
            }
            if (!ok)
                throw std::runtime_error("no initial point with finite log posterior after " +
                                         std::to_string(config.init_attempts) + " attempts");
            results[c] = config.algorithm == Algorithm::nuts
                             ? run_nuts(target, init, config.warmup, config.iterations, config.target_accept,
                                        config.max_depth, rng)
                             : run_rwm(target, init, config.warmup, config.iterations, rng);
        } catch (const std::exception& e) {
            errors[c] = e.what();
        }
    };

    const std::size_t nthreads = std::min(thread_count(config.threads), nc);
    if (nthreads <= 1) {
        for (std::size_t c = 0; c < nc; ++c) run_chain(c);
    } else {
        std::vector<std::thread> pool;
        std::size_t next = 0;
        std::mutex m;
        for (std::size_t t = 0; t < nthreads; ++t)
            pool.emplace_back([&]() {
                for (;;) {
                    std::size_t c;
                    {
                        std::lock_guard lock(m);
                        if (next >= nc) return;
                        c = next++;
                    }
                    run_chain(c);
                }
            });
        for (auto& th : pool) th.join();
    }
    for (std::size_t c = 0; c < nc; ++c)
        if (!errors[c].empty()) throw std::runtime_error("chain " + std::to_string(c + 1) + ": " + errors[c]);

    PosteriorDraws out;
    out.names = model.layout().constrained_names(model.spec().covariates);
    out.n_chains = nc;
    const auto n_iter = static_cast<Eigen::Index>(config.iterations);
    const auto total = n_iter * static_cast<Eigen::Index>(nc);
    out.draws.resize(total, static_cast<Eigen::Index>(model.layout().constrained_dim));
    out.loglik.resize(total, static_cast<Eigen::Index>(model.n_observations()));
    std::size_t divergences = 0;
    for (std::size_t c = 0; c < nc; ++c) {
        const auto& res = results[c];
        for (Eigen::Index i = 0; i < n_iter; ++i) {
            const Eigen::VectorXd th = res.draws.row(i).transpose();
            const Eigen::Index r = static_cast<Eigen::Index>(c) * n_iter + i;
            out.draws.row(r) = model.to_constrained(th).transpose();
            if (out.loglik.cols() > 0) out.loglik.row(r) = model.pointwise_loglik(th).transpose();
            out.chain.push_back(static_cast<int>(c));
        }
        divergences += res.stats.divergences;
        out.stats.push_back(res.stats);
    }
    const double rate = static_cast<double>(divergences) / static_cast<double>(total);
    if (rate > 0.1)
        out.warnings.push_back("divergent transitions in " + std::to_string(divergences) + " of " +
                               std::to_string(total) + " draws");
    else if (divergences > 0)
        out.warnings.push_back(std::to_string(divergences) + " divergent transitions after warmup");
    return out;
}

}  // namespace hazspline
