#include "fekf/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "fekf/errors.hpp"
#include "fekf/rng.hpp"

namespace fekf {

int Scenario::substeps_central() const {
    const double ratio = sample_interval / central_dt;
    const int steps = static_cast<int>(std::lround(ratio));
    if (std::abs(ratio - steps) > 1e-9 || steps < 1)
        throw ConfigError("sample_interval must be an integer multiple of central_dt");
    return steps;
}

void Scenario::validate() const {
    if (shape != "l_shape" && shape != "rect") throw ConfigError("unknown domain shape: " + shape);
    if (!(coarse_edge_target > 0.0)) throw ConfigError("coarse_edge_target must be positive");
    if (truth_refinements < 0) throw ConfigError("truth_refinements must be >= 0");
    if (!(diffusivity > 0.0)) throw ConfigError("diffusivity must be positive");
    if (grid_nx < 1 || grid_ny < 1) throw ConfigError("decomposition grid must be >= 1x1");
    if (overlap_layers < 1) throw ConfigError("overlap_layers must be >= 1");
    if (!(sample_interval > 0.0) || !(central_dt > 0.0) || !(truth_dt > 0.0))
        throw ConfigError("time steps must be positive");
    substeps_central();
    if (duration_samples < 1) throw ConfigError("duration_samples must be >= 1");
    if (consensus_steps.empty()) throw ConfigError("at least one consensus step count required");
    for (int L : consensus_steps)
        if (L < 1) throw ConfigError("consensus step counts must be >= 1");
    if (!(gamma >= 1.0)) throw ConfigError("gamma must be >= 1");
    if (!(sigma_w > 0.0) || !(sigma_v > 0.0)) throw ConfigError("noise levels must be positive");
    if (!(initial_cov > 0.0)) throw ConfigError("initial_cov must be positive");
    if (sensors.empty()) throw ConfigError("sensor list is empty");
    if (mc_runs < 1) throw ConfigError("mc_runs must be >= 1");
    if (!(lattice_spacing > 0.0)) throw ConfigError("lattice_spacing must be positive");
    if (steady_window < 1 || steady_window > duration_samples)
        throw ConfigError("steady_window must lie in [1, duration_samples]");

    // One condition kind per (segment, time): ranges for a segment must not
    // overlap.
    std::map<std::string, std::vector<std::pair<int, int>>> by_segment;
    for (const auto& p : schedule) {
        if (p.from_sample < 0 || p.to_sample <= p.from_sample)
            throw ConfigError("schedule range [" + std::to_string(p.from_sample) + ", " +
                              std::to_string(p.to_sample) + ") is empty");
        if (p.kind == BcKind::Robin && p.robin_nu < 0.0)
            throw ConfigError("robin coefficient must be nonnegative");
        by_segment[p.segment].push_back({p.from_sample, p.to_sample});
    }
    for (auto& [seg, ranges] : by_segment) {
        std::sort(ranges.begin(), ranges.end());
        for (std::size_t i = 1; i < ranges.size(); ++i)
            if (ranges[i].first < ranges[i - 1].second)
                throw ConfigError("overlapping schedule entries for segment '" + seg + "'");
    }
}

namespace {

std::vector<std::string> tokens(const std::string& s) {
    std::istringstream is(s);
    std::vector<std::string> out;
    std::string t;
    while (is >> t) out.push_back(t);
    return out;
}

double to_double(const std::string& s, int line) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("expected a number, got '" + s + "'", line);
    }
}

int to_int(const std::string& s, int line) {
    const double v = to_double(s, line);
    if (v != std::floor(v)) throw ConfigError("expected an integer, got '" + s + "'", line);
    return static_cast<int>(v);
}

BoundaryPhase parse_bc(const std::vector<std::string>& t, int line) {
    if (t.size() < 4) throw ConfigError("bc needs: segment from to kind [params]", line);
    BoundaryPhase p;
    p.segment = t[0];
    p.from_sample = to_int(t[1], line);
    p.to_sample = to_int(t[2], line);
    if (t[3] == "dirichlet") {
        if (t.size() != 5) throw ConfigError("dirichlet bc needs one value", line);
        p.kind = BcKind::DirichletValue;
        p.value = to_double(t[4], line);
    } else if (t[3] == "neumann_zero") {
        if (t.size() != 4) throw ConfigError("neumann_zero bc takes no parameters", line);
        p.kind = BcKind::NeumannZero;
    } else if (t[3] == "robin") {
        if (t.size() != 6) throw ConfigError("robin bc needs nu and external value", line);
        p.kind = BcKind::Robin;
        p.robin_nu = to_double(t[4], line);
        p.robin_external = to_double(t[5], line);
    } else {
        throw ConfigError("unknown bc kind '" + t[3] + "'", line);
    }
    return p;
}

}  // namespace

Scenario parse_scenario(std::istream& is, const std::string& name) {
    Scenario sc;
    sc.name = name;
    sc.consensus_steps.clear();
    sc.snapshot_samples.clear();

    std::string section, line;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        auto last = line.find_last_not_of(" \t\r");
        line = line.substr(first, last - first + 1);

        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError("unterminated section header", line_no);
            section = line.substr(1, line.size() - 2);
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("expected key = value", line_no);
        std::string key = line.substr(0, eq);
        key.erase(key.find_last_not_of(" \t") + 1);
        const auto vals = tokens(line.substr(eq + 1));
        if (vals.empty()) throw ConfigError("missing value for key '" + key + "'", line_no);
        const std::string& v0 = vals.front();

        auto want = [&](std::size_t n) {
            if (vals.size() != n)
                throw ConfigError("key '" + key + "' expects " + std::to_string(n) + " value(s)",
                                  line_no);
        };

        if (section == "domain") {
            if (key == "shape") {
                want(1);
                sc.shape = v0;
            } else if (key == "rect_width") {
                want(1);
                sc.rect_width = to_double(v0, line_no);
            } else if (key == "rect_height") {
                want(1);
                sc.rect_height = to_double(v0, line_no);
            } else if (key == "coarse_edge_target") {
                want(1);
                sc.coarse_edge_target = to_double(v0, line_no);
            } else if (key == "truth_refinements") {
                want(1);
                sc.truth_refinements = to_int(v0, line_no);
            } else if (key == "diffusivity") {
                want(1);
                sc.diffusivity = to_double(v0, line_no);
            } else {
                throw ConfigError("unknown key '" + key + "' in [domain]", line_no);
            }
        } else if (section == "decomposition") {
            if (key == "grid") {
                want(2);
                sc.grid_nx = to_int(vals[0], line_no);
                sc.grid_ny = to_int(vals[1], line_no);
            } else if (key == "overlap_layers") {
                want(1);
                sc.overlap_layers = to_int(v0, line_no);
            } else {
                throw ConfigError("unknown key '" + key + "' in [decomposition]", line_no);
            }
        } else if (section == "time") {
            if (key == "sample_interval") {
                want(1);
                sc.sample_interval = to_double(v0, line_no);
            } else if (key == "central_dt") {
                want(1);
                sc.central_dt = to_double(v0, line_no);
            } else if (key == "truth_dt") {
                want(1);
                sc.truth_dt = to_double(v0, line_no);
            } else if (key == "duration_samples") {
                want(1);
                sc.duration_samples = to_int(v0, line_no);
            } else {
                throw ConfigError("unknown key '" + key + "' in [time]", line_no);
            }
        } else if (section == "filters") {
            if (key == "consensus_steps") {
                for (const auto& v : vals) sc.consensus_steps.push_back(to_int(v, line_no));
            } else if (key == "gamma") {
                want(1);
                sc.gamma = to_double(v0, line_no);
            } else if (key == "sigma_w") {
                want(1);
                sc.sigma_w = to_double(v0, line_no);
            } else if (key == "sigma_v") {
                want(1);
                sc.sigma_v = to_double(v0, line_no);
            } else if (key == "initial_estimate") {
                want(1);
                sc.initial_estimate = to_double(v0, line_no);
            } else if (key == "initial_cov") {
                want(1);
                sc.initial_cov = to_double(v0, line_no);
            } else {
                throw ConfigError("unknown key '" + key + "' in [filters]", line_no);
            }
        } else if (section == "truth") {
            if (key == "initial_field") {
                want(1);
                sc.initial_field = to_double(v0, line_no);
            } else {
                throw ConfigError("unknown key '" + key + "' in [truth]", line_no);
            }
        } else if (section == "schedule") {
            if (key == "bc") {
                sc.schedule.push_back(parse_bc(vals, line_no));
            } else {
                throw ConfigError("unknown key '" + key + "' in [schedule]", line_no);
            }
        } else if (section == "sensors") {
            if (key == "sensor") {
                want(2);
                sc.sensors.push_back({to_double(vals[0], line_no), to_double(vals[1], line_no)});
            } else {
                throw ConfigError("unknown key '" + key + "' in [sensors]", line_no);
            }
        } else if (section == "monte_carlo") {
            if (key == "runs") {
                want(1);
                sc.mc_runs = to_int(v0, line_no);
            } else if (key == "seed") {
                want(1);
                sc.seed = static_cast<std::uint64_t>(std::stoull(v0));
            } else {
                throw ConfigError("unknown key '" + key + "' in [monte_carlo]", line_no);
            }
        } else if (section == "evaluation") {
            if (key == "lattice_spacing") {
                want(1);
                sc.lattice_spacing = to_double(v0, line_no);
            } else if (key == "steady_window") {
                want(1);
                sc.steady_window = to_int(v0, line_no);
            } else if (key == "snapshots") {
                for (const auto& v : vals) sc.snapshot_samples.push_back(to_int(v, line_no));
            } else if (key == "gamma_sweep") {
                for (const auto& v : vals) sc.gamma_sweep.push_back(to_double(v, line_no));
            } else if (key == "gamma_sweep_runs") {
                want(1);
                sc.gamma_sweep_runs = to_int(v0, line_no);
            } else if (key == "emit_trajectories") {
                want(1);
                sc.emit_trajectories = to_int(v0, line_no) != 0;
            } else {
                throw ConfigError("unknown key '" + key + "' in [evaluation]", line_no);
            }
        } else if (section.empty()) {
            throw ConfigError("key outside any section", line_no);
        } else {
            throw ConfigError("unknown section [" + section + "]", line_no);
        }
    }
    if (sc.consensus_steps.empty()) sc.consensus_steps = {1, 2, 10};
    sc.validate();
    return sc;
}

Scenario load_scenario_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file: " + path);
    std::string name = path;
    const auto slash = name.find_last_of('/');
    if (slash != std::string::npos) name = name.substr(slash + 1);
    const auto dot = name.find_last_of('.');
    if (dot != std::string::npos) name = name.substr(0, dot);
    return parse_scenario(is, name);
}

std::string Scenario::canonical() const {
    std::ostringstream os;
    char buf[64];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        os << buf << '\n';
    };
    os << shape << '\n';
    num(rect_width);
    num(rect_height);
    num(coarse_edge_target);
    os << truth_refinements << '\n';
    num(diffusivity);
    os << grid_nx << ' ' << grid_ny << ' ' << overlap_layers << '\n';
    num(sample_interval);
    num(central_dt);
    num(truth_dt);
    os << duration_samples << '\n';
    for (int L : consensus_steps) os << L << ' ';
    os << '\n';
    num(gamma);
    num(sigma_w);
    num(sigma_v);
    num(initial_estimate);
    num(initial_cov);
    num(initial_field);
    for (const auto& p : schedule) {
        os << p.segment << ' ' << p.from_sample << ' ' << p.to_sample << ' '
           << static_cast<int>(p.kind) << ' ';
        num(p.value);
        num(p.robin_nu);
        num(p.robin_external);
    }
    for (const auto& s : sensors) {
        num(s.x);
        num(s.y);
    }
    os << mc_runs << ' ' << seed << '\n';
    num(lattice_spacing);
    os << steady_window << '\n';
    return os.str();
}

std::uint64_t Scenario::config_hash() const {
    const std::string text = canonical();
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return splitmix64(h);
}

}  // namespace fekf
