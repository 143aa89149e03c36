#include "hazspline/config.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <limits>
#include <set>

#include <json.hpp>

#include "hazspline/io.hpp"

namespace hazspline {

namespace {

using nlohmann::json;

// Line tracking: the parser pulls characters through this iterator, so at each
// callback the count reflects how far the lexer has read.
struct LineCounter {
    std::size_t line = 1;
    char last = 0;
};

struct CountingIterator {
    using iterator_category = std::forward_iterator_tag;
    using value_type = char;
    using difference_type = std::ptrdiff_t;
    using pointer = const char*;
    using reference = const char&;

    const char* p = nullptr;
    LineCounter* counter = nullptr;

    reference operator*() const { return *p; }
    CountingIterator& operator++() {
        counter->last = *p;
        if (*p == '\n') ++counter->line;
        ++p;
        return *this;
    }
    CountingIterator operator++(int) {
        auto old = *this;
        ++*this;
        return old;
    }
    bool operator==(const CountingIterator& o) const { return p == o.p; }
};

struct Frame {
    bool array = false;
    std::string pointer;
    std::string key;
    std::size_t index = 0;
};

std::string escape_token(const std::string& key) {
    std::string out;
    for (char c : key) {
        if (c == '~') out += "~0";
        else if (c == '/') out += "~1";
        else out += c;
    }
    return out;
}

class Document {
public:
    Document(const std::string& text, std::string source) : source_(std::move(source)) {
        LineCounter counter;
        std::vector<Frame> stack;
        auto child_pointer = [&]() {
            const auto& f = stack.back();
            return f.pointer + "/" + (f.array ? std::to_string(f.index) : escape_token(f.key));
        };
        auto cb = [&](int, json::parse_event_t ev, json& parsed) {
            switch (ev) {
                case json::parse_event_t::key:
                    stack.back().key = parsed.get<std::string>();
                    lines_[child_pointer()] = counter.line;
                    break;
                case json::parse_event_t::object_start:
                case json::parse_event_t::array_start: {
                    std::string ptr;
                    if (!stack.empty()) {
                        ptr = child_pointer();
                        if (stack.back().array) lines_[ptr] = counter.line;
                    }
                    stack.push_back({ev == json::parse_event_t::array_start, ptr, {}, 0});
                    break;
                }
                case json::parse_event_t::object_end:
                case json::parse_event_t::array_end:
                    stack.pop_back();
                    if (!stack.empty() && stack.back().array) ++stack.back().index;
                    break;
                case json::parse_event_t::value:
                    if (!stack.empty() && stack.back().array) {
                        // Numbers are terminated by the character after them.
                        std::size_t line = counter.line;
                        if (parsed.is_number() && counter.last == '\n') --line;
                        lines_[child_pointer()] = line;
                        ++stack.back().index;
                    }
                    break;
            }
            return true;
        };
        CountingIterator first{text.data(), &counter}, last{text.data() + text.size(), &counter};
        try {
            root_ = json::parse(first, last, cb, true, true);
        } catch (const json::parse_error& e) {
            std::string msg = e.what();
            const auto pos = msg.find("syntax error");
            throw InputError(source_, counter.line, pos == std::string::npos ? msg : msg.substr(pos));
        }
        if (!root_.is_object()) throw InputError(source_, 1, "configuration must be a JSON object");
    }

    [[nodiscard]] const json& root() const { return root_; }

    [[noreturn]] void fail(const std::string& pointer, const std::string& message) const {
        fail_at(pointer, label(pointer) + message);
    }

    /// Line of `pointer` or its nearest recorded ancestor; message used as is.
    [[noreturn]] void fail_at(const std::string& pointer, const std::string& message) const {
        std::string p = pointer;
        while (true) {
            auto it = lines_.find(p);
            if (it != lines_.end()) throw InputError(source_, it->second, message);
            if (p.empty()) break;
            p = p.substr(0, p.rfind('/'));
        }
        throw InputError(source_, 0, message);
    }

private:
    static std::string label(const std::string& pointer) {
        if (pointer.empty()) return "";
        std::string out = pointer.substr(1);
        std::replace(out.begin(), out.end(), '/', '.');
        return out + ": ";
    }

    std::string source_;
    json root_;
    std::map<std::string, std::size_t> lines_;
};

// Typed access to one JSON object, reporting errors at the key's line.
class Section {
public:
    Section(const Document& doc, const json& obj, std::string pointer, std::set<std::string> allowed)
        : doc_(doc), obj_(obj), pointer_(std::move(pointer)) {
        if (!obj_.is_object()) doc_.fail(pointer_, "expected an object");
        for (const auto& [k, v] : obj_.items()) {
            if (!allowed.count(k)) {
                std::string expected;
                for (const auto& a : allowed) expected += (expected.empty() ? "" : ", ") + a;
                doc_.fail(pointer_ + "/" + escape_token(k), "unknown key (expected one of: " + expected + ")");
            }
        }
    }

    [[nodiscard]] bool has(const std::string& key) const { return obj_.contains(key) && !obj_.at(key).is_null(); }
    [[nodiscard]] std::string ptr(const std::string& key) const { return pointer_ + "/" + escape_token(key); }
    [[nodiscard]] const json& at(const std::string& key) const { return obj_.at(key); }
    [[nodiscard]] const Document& doc() const { return doc_; }
    [[noreturn]] void fail(const std::string& key, const std::string& msg) const { doc_.fail(ptr(key), msg); }

    [[nodiscard]] Section sub(const std::string& key, std::set<std::string> allowed) const {
        return Section(doc_, obj_.at(key), ptr(key), std::move(allowed));
    }

    void get(const std::string& key, double& out) const {
        if (!has(key)) return;
        if (!at(key).is_number()) fail(key, "expected a number");
        out = at(key).get<double>();
        if (!std::isfinite(out)) fail(key, "must be finite");
    }
    void get(const std::string& key, std::optional<double>& out) const {
        if (!has(key)) return;
        double v = 0.0;
        get(key, v);
        out = v;
    }
    void get(const std::string& key, bool& out) const {
        if (!has(key)) return;
        if (!at(key).is_boolean()) fail(key, "expected true or false");
        out = at(key).get<bool>();
    }
    void get(const std::string& key, std::string& out) const {
        if (!has(key)) return;
        if (!at(key).is_string()) fail(key, "expected a string");
        out = at(key).get<std::string>();
    }
    void get(const std::string& key, std::optional<std::string>& out) const {
        if (!has(key)) return;
        std::string v;
        get(key, v);
        out = v;
    }
    template <class Int>
        requires std::is_integral_v<Int>
    void get(const std::string& key, Int& out) const {
        if (!has(key)) return;
        const auto& v = at(key);
        if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0))
            fail(key, "expected a non-negative integer");
        const auto u = v.get<unsigned long long>();
        if (u > static_cast<unsigned long long>(std::numeric_limits<Int>::max())) fail(key, "value is too large");
        out = static_cast<Int>(u);
    }
    void get(const std::string& key, std::vector<double>& out) const {
        if (!has(key)) return;
        if (!at(key).is_array()) fail(key, "expected an array of numbers");
        out.clear();
        std::size_t i = 0;
        for (const auto& v : at(key)) {
            if (!v.is_number() || !std::isfinite(v.get<double>()))
                doc_.fail(ptr(key) + "/" + std::to_string(i), "expected a number");
            out.push_back(v.get<double>());
            ++i;
        }
    }
    void get(const std::string& key, std::vector<std::string>& out) const {
        if (!has(key)) return;
        if (!at(key).is_array()) fail(key, "expected an array of strings");
        out.clear();
        std::size_t i = 0;
        for (const auto& v : at(key)) {
            if (!v.is_string()) doc_.fail(ptr(key) + "/" + std::to_string(i), "expected a string");
            out.push_back(v.get<std::string>());
            ++i;
        }
    }

    // Array of objects, each read by f(Section).
    template <class F>
    void each(const std::string& key, std::set<std::string> allowed, F&& f) const {
        if (!has(key)) return;
        if (!at(key).is_array()) fail(key, "expected an array");
        std::size_t i = 0;
        for (const auto& v : at(key)) {
            f(Section(doc_, v, ptr(key) + "/" + std::to_string(i), allowed), i);
            ++i;
        }
    }

private:
    const Document& doc_;
    const json& obj_;
    std::string pointer_;
};

std::string resolve(const std::string& path, const std::filesystem::path& base) {
    if (path.empty()) return path;
    std::filesystem::path p(path);
    if (p.is_relative()) p = base / p;
    return p.lexically_normal().string();
}

NormalPrior read_normal(const Section& s) {
    NormalPrior p;
    s.get("location", p.location);
    s.get("scale", p.scale);
    return p;
}

GammaPrior read_gamma(const Section& s) {
    GammaPrior p;
    s.get("shape", p.shape);
    s.get("rate", p.rate);
    return p;
}

// A single prior object, or an array with one per covariate.
template <class P, class R>
void read_prior_list(const Section& s, const std::string& key, std::set<std::string> allowed, std::vector<P>& out,
                     R read) {
    if (!s.has(key)) return;
    out.clear();
    if (s.at(key).is_object()) {
        out.push_back(read(s.sub(key, allowed)));
    } else {
        s.each(key, allowed, [&](const Section& e, std::size_t) { out.push_back(read(e)); });
    }
}

const std::set<std::string> kNormalKeys{"location", "scale"};
const std::set<std::string> kGammaKeys{"shape", "rate"};

}  // namespace

void RunConfig::validate() const {
    auto err = [](const std::string& msg) { throw std::invalid_argument(msg); };
    std::set<std::string> seen;
    for (const auto& c : covariates) {
        if (c.empty()) err("covariates: empty name");
        if (!seen.insert(c).second) err("covariates: duplicate name '" + c + "'");
    }
    if (treatment && !seen.count(*treatment)) err("treatment: '" + *treatment + "' is not listed in covariates");
    if (model.additive && data.background.empty())
        err("model.additive requires a background hazard file (data.background)");
    if (!model.additive && !data.background.empty()) err("data.background is given but model.additive is false");
    if (model.nonprop && covariates.empty()) err("model.nonprop requires at least one covariate");
    if (knots.n_basis < 4) err("knots.n_basis must be at least 4");
    if (knots.internal && !knots.upper) err("knots.internal requires knots.upper");
    if (data.individual.empty() && !knots.upper) err("knots.upper is required without individual data");
    if (knots.upper && !(*knots.upper > 0.0)) err("knots.upper must be positive");
    if (!priors.loghr.empty() && priors.loghr.size() != 1 && priors.loghr.size() != covariates.size())
        err("priors.loghr must be one prior or one per covariate");
    if (!priors.tau.empty() && priors.tau.size() != 1 && priors.tau.size() != covariates.size())
        err("priors.tau must be one prior or one per covariate");
    try {
        priors.validate();
    } catch (const std::invalid_argument& e) {
        err(std::string("priors: ") + e.what());
    }
    try {
        sampler.validate();
    } catch (const std::invalid_argument& e) {
        err(std::string("sampler: ") + e.what());
    }
    if (!(output.level > 0.0 && output.level < 1.0)) err("output.level must be in (0, 1)");
    const std::set<std::string> quantities{"survival", "hazard", "rmst", "irmst", "median"};
    for (const auto& q : output.quantities)
        if (!quantities.count(q)) err("output.quantities: unknown quantity '" + q + "'");
    for (double t : output.times)
        if (t < 0.0) err("output.times must be non-negative");
    for (double t : output.rmst_horizons)
        if (!(t > 0.0)) err("output.rmst_horizons must be positive");
    if (output.grid_points < 2) err("output.grid_points must be at least 2");
    if (output.curve_points < 2) err("output.curve_points must be at least 2");
    for (const auto& w : output.waning)
        if (!(w.t_min >= 0.0 && w.t_max > w.t_min)) err("output.waning: need 0 <= t_min < t_max");
    if (!output.waning.empty() && !treatment) err("output.waning requires a treatment column");
    std::set<std::string> labels;
    for (const auto& p : output.patterns) {
        if (p.label.empty()) err("output.patterns: every pattern needs a label");
        if (!labels.insert(p.label).second) err("output.patterns: duplicate label '" + p.label + "'");
        for (const auto& [name, v] : p.values)
            if (!seen.count(name)) err("output.patterns: '" + name + "' is not a covariate");
    }
    if (prior_sim.n_sims < 10) err("prior_sim.n_sims must be at least 10");
    if (prior_sim.grid < 2) err("prior_sim.grid must be at least 2");
}

RunConfig parse_config(const std::string& text, const std::string& source, const std::filesystem::path& base_dir) {
    const Document doc(text, source);
    const Section top(doc, doc.root(), "",
                      {"data", "covariates", "treatment", "model", "knots", "priors", "sampler", "output", "prior_sim"});
    RunConfig cfg;

    if (top.has("data")) {
        const auto s = top.sub("data", {"individual", "external", "background"});
        s.get("individual", cfg.data.individual);
        s.get("external", cfg.data.external);
        s.get("background", cfg.data.background);
    }
    cfg.data.individual = resolve(cfg.data.individual, base_dir);
    cfg.data.external = resolve(cfg.data.external, base_dir);
    cfg.data.background = resolve(cfg.data.background, base_dir);

    top.get("covariates", cfg.covariates);
    top.get("treatment", cfg.treatment);

    if (top.has("model")) {
        const auto s = top.sub("model", {"cure", "additive", "nonprop"});
        s.get("cure", cfg.model.cure);
        s.get("additive", cfg.model.additive);
        s.get("nonprop", cfg.model.nonprop);
    }

    if (top.has("knots")) {
        const auto s = top.sub("knots", {"n_basis", "extra", "upper", "internal", "smooth_boundary"});
        s.get("n_basis", cfg.knots.n_basis);
        s.get("extra", cfg.knots.extra);
        s.get("upper", cfg.knots.upper);
        if (s.has("internal")) {
            std::vector<double> internal;
            s.get("internal", internal);
            cfg.knots.internal = internal;
        }
        s.get("smooth_boundary", cfg.knots.smooth_boundary);
    }

    if (top.has("priors")) {
        const auto s = top.sub("priors", {"log_eta0", "loghr", "sigma", "tau", "cure"});
        if (s.has("log_eta0")) cfg.priors.log_eta0 = read_normal(s.sub("log_eta0", kNormalKeys));
        if (s.has("sigma")) cfg.priors.sigma = read_gamma(s.sub("sigma", kGammaKeys));
        read_prior_list(s, "loghr", kNormalKeys, cfg.priors.loghr, read_normal);
        read_prior_list(s, "tau", kGammaKeys, cfg.priors.tau, read_gamma);
        if (s.has("cure")) {
            const auto c = s.sub("cure", {"a", "b"});
            c.get("a", cfg.priors.cure.a);
            c.get("b", cfg.priors.cure.b);
        }
    }

    if (top.has("sampler")) {
        const auto s = top.sub("sampler", {"chains", "warmup", "iterations", "seed", "target_accept", "max_depth",
                                           "algorithm", "threads", "init_attempts"});
        s.get("chains", cfg.sampler.chains);
        s.get("warmup", cfg.sampler.warmup);
        s.get("iterations", cfg.sampler.iterations);
        s.get("seed", cfg.sampler.seed);
        s.get("target_accept", cfg.sampler.target_accept);
        s.get("max_depth", cfg.sampler.max_depth);
        s.get("threads", cfg.sampler.threads);
        s.get("init_attempts", cfg.sampler.init_attempts);
        if (s.has("algorithm")) {
            std::string a;
            s.get("algorithm", a);
            if (a == "nuts") cfg.sampler.algorithm = Algorithm::nuts;
            else if (a == "rwm") cfg.sampler.algorithm = Algorithm::rwm;
            else s.fail("algorithm", "expected \"nuts\" or \"rwm\"");
        }
    }

    if (top.has("output")) {
        const auto s = top.sub("output", {"dir", "save_draws", "quantities", "times", "grid_points", "rmst_horizons",
                                          "waning", "level", "patterns", "curve_points"});
        s.get("dir", cfg.output.dir);
        s.get("save_draws", cfg.output.save_draws);
        s.get("quantities", cfg.output.quantities);
        s.get("times", cfg.output.times);
        s.get("grid_points", cfg.output.grid_points);
        s.get("rmst_horizons", cfg.output.rmst_horizons);
        s.get("level", cfg.output.level);
        s.get("curve_points", cfg.output.curve_points);
        if (s.has("waning")) {
            cfg.output.waning.clear();
            s.each("waning", {"t_min", "t_max"}, [&](const Section& e, std::size_t) {
                WaningScenario w;
                e.get("t_min", w.t_min);
                e.get("t_max", w.t_max);
                cfg.output.waning.push_back(w);
            });
        }
        if (s.has("patterns")) {
            cfg.output.patterns.clear();
            s.each("patterns", {"label", "values"}, [&](const Section& e, std::size_t) {
                PatternConfig p;
                e.get("label", p.label);
                if (e.has("values")) {
                    const auto& obj = e.at("values");
                    if (!obj.is_object()) e.fail("values", "expected an object of covariate values");
                    for (const auto& [k, v] : obj.items()) {
                        if (!v.is_number()) doc.fail(e.ptr("values") + "/" + escape_token(k), "expected a number");
                        p.values[k] = v.get<double>();
                    }
                }
                cfg.output.patterns.push_back(std::move(p));
            });
        }
    }
    cfg.output.dir = resolve(cfg.output.dir, base_dir);

    if (top.has("prior_sim")) {
        const auto s = top.sub("prior_sim", {"n_sims", "grid", "calibrate_sigma", "calibrate_scale"});
        s.get("n_sims", cfg.prior_sim.n_sims);
        s.get("grid", cfg.prior_sim.grid);
        if (s.has("calibrate_sigma")) {
            const auto c = s.sub("calibrate_sigma", {"median", "upper"});
            RhoTarget t;
            c.get("median", t.median);
            c.get("upper", t.upper);
            cfg.prior_sim.calibrate_sigma = t;
        }
        if (s.has("calibrate_scale")) {
            const auto c = s.sub("calibrate_scale", {"mean", "low", "high"});
            MeanSurvivalTarget t;
            c.get("mean", t.mean);
            c.get("low", t.low);
            c.get("high", t.high);
            cfg.prior_sim.calibrate_scale = t;
        }
    }

    try {
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        // Messages start with the dotted key they concern; report that key's line.
        const std::string msg = e.what();
        std::string pointer = "/" + msg.substr(0, msg.find_first_of(" :"));
        std::replace(pointer.begin(), pointer.end(), '.', '/');
        doc.fail_at(pointer, msg);
    }
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
    const auto base = std::filesystem::absolute(path).parent_path();
    return parse_config(read_text(path), path.string(), base);
}

std::string config_echo(const RunConfig& cfg) {
    auto opt = [](const auto& v) { return v ? json(*v) : json(nullptr); };
    auto normal = [](const NormalPrior& p) { return json{{"location", p.location}, {"scale", p.scale}}; };
    auto gamma = [](const GammaPrior& p) { return json{{"shape", p.shape}, {"rate", p.rate}}; };
    json loghr = json::array(), tau = json::array();
    for (const auto& p : cfg.priors.loghr) loghr.push_back(normal(p));
    for (const auto& p : cfg.priors.tau) tau.push_back(gamma(p));
    json waning = json::array(), patterns = json::array();
    for (const auto& w : cfg.output.waning) waning.push_back({{"t_min", w.t_min}, {"t_max", w.t_max}});
    for (const auto& p : cfg.output.patterns) {
        json values = json::object();
        for (const auto& [k, v] : p.values) values[k] = v;
        patterns.push_back({{"label", p.label}, {"values", values}});
    }
    json prior_sim{{"n_sims", cfg.prior_sim.n_sims}, {"grid", cfg.prior_sim.grid}};
    prior_sim["calibrate_sigma"] =
        cfg.prior_sim.calibrate_sigma
            ? json{{"median", cfg.prior_sim.calibrate_sigma->median}, {"upper", cfg.prior_sim.calibrate_sigma->upper}}
            : json(nullptr);
    prior_sim["calibrate_scale"] = cfg.prior_sim.calibrate_scale
                                       ? json{{"mean", cfg.prior_sim.calibrate_scale->mean},
                                              {"low", cfg.prior_sim.calibrate_scale->low},
                                              {"high", cfg.prior_sim.calibrate_scale->high}}
                                       : json(nullptr);

    const json j{
        {"data",
         {{"individual", cfg.data.individual}, {"external", cfg.data.external}, {"background", cfg.data.background}}},
        {"covariates", cfg.covariates},
        {"treatment", opt(cfg.treatment)},
        {"model", {{"cure", cfg.model.cure}, {"additive", cfg.model.additive}, {"nonprop", cfg.model.nonprop}}},
        {"knots",
         {{"n_basis", cfg.knots.n_basis},
          {"extra", cfg.knots.extra},
          {"upper", opt(cfg.knots.upper)},
          {"internal", opt(cfg.knots.internal)},
          {"smooth_boundary", cfg.knots.smooth_boundary}}},
        {"priors",
         {{"log_eta0", normal(cfg.priors.log_eta0)},
          {"loghr", loghr},
          {"sigma", gamma(cfg.priors.sigma)},
          {"tau", tau},
          {"cure", {{"a", cfg.priors.cure.a}, {"b", cfg.priors.cure.b}}}}},
        {"sampler",
         {{"chains", cfg.sampler.chains},
          {"warmup", cfg.sampler.warmup},
          {"iterations", cfg.sampler.iterations},
          {"seed", cfg.sampler.seed},
          {"target_accept", cfg.sampler.target_accept},
          {"max_depth", cfg.sampler.max_depth},
          {"algorithm", cfg.sampler.algorithm == Algorithm::nuts ? "nuts" : "rwm"},
          {"threads", cfg.sampler.threads},
          {"init_attempts", cfg.sampler.init_attempts}}},
        {"output",
         {{"dir", cfg.output.dir},
          {"save_draws", cfg.output.save_draws},
          {"quantities", cfg.output.quantities},
          {"times", cfg.output.times},
          {"grid_points", cfg.output.grid_points},
          {"rmst_horizons", cfg.output.rmst_horizons},
          {"waning", waning},
          {"level", cfg.output.level},
          {"patterns", patterns},
          {"curve_points", cfg.output.curve_points}}},
        {"prior_sim", prior_sim},
    };
    return j.dump(2) + "\n";
}

}  // namespace hazspline
