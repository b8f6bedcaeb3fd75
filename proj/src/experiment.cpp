#include "spg/experiment.hpp"

#include "spg/trace_io.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

namespace spg {

namespace {

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream in(v);
    for (std::string item; std::getline(in, item, ',');) {
        const auto b = item.find_first_not_of(" \t");
        const auto e = item.find_last_not_of(" \t");
        if (b == std::string::npos) throw Error(ErrorCode::parse, "empty entry in list '" + v + "'");
        out.push_back(item.substr(b, e - b + 1));
    }
    if (out.empty()) throw Error(ErrorCode::parse, "empty list");
    return out;
}

std::optional<double> threshold_value(const std::string& v) {
    if (v == "off" || v == "none") return std::nullopt;
    return parse_real(v);
}

std::string threshold_text(const std::optional<double>& x) { return x ? format_real(*x) : "off"; }

template <class T, class F>
std::string join(const std::vector<T>& xs, F&& fmt) {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? "," : "") + fmt(xs[i]);
    return out;
}

void apply_run_key(ExperimentSpec& s, const std::string& key, const std::string& v) {
    if (key == "algo") {
        s.algorithm = parse_algorithm(v);
    } else if (key == "eta") {
        s.eta = parse_real(v);
    } else if (key == "max_iter") {
        s.max_iter = parse_count(v);
    } else if (key == "stop_sup") {
        s.stop_sup_error = threshold_value(v);
    } else if (key == "stop_mean") {
        s.stop_mean_error = threshold_value(v);
    } else if (key == "eval_tol") {
        s.eval_tol = parse_real(v);
    } else if (key == "snapshot_stride") {
        s.snapshot_stride = parse_count(v);
    } else if (key == "stop_after") {
        s.stop_after.clear();
        for (const auto& x : split_list(v)) s.stop_after.push_back(static_cast<int>(parse_count(x)));
    } else if (key == "seed") {
        s.seed = parse_count(v);
    } else if (key == "policies") {
        s.policies = parse_count(v);
    } else if (key == "sizes") {
        s.sizes.clear();
        for (const auto& x : split_list(v)) s.sizes.push_back(parse_count(x));
    } else if (key == "gammas") {
        s.gammas.clear();
        for (const auto& x : split_list(v)) s.gammas.push_back(parse_real(x));
    } else if (key == "etas") {
        s.etas.clear();
        for (const auto& x : split_list(v)) s.etas.push_back(parse_real(x));
    } else {
        throw Error(ErrorCode::parse, "unknown parameter '" + key + "'");
    }
}

std::ofstream open_out(const std::filesystem::path& p) {
    std::ofstream out(p);
    if (!out) throw Error(ErrorCode::io, "cannot write " + p.string());
    return out;
}

} // namespace

double ExperimentSpec::effective_eta() const {
    if (eta) return *eta;
    const double g = instance.params.gamma;
    return algorithm == Algorithm::npg ? default_npg_eta(g) : (1.0 - g) * (1.0 - g) / 10.0;
}

ExperimentSpec read_experiment(std::istream& in) {
    KeyValues kv = read_key_values(in);
    ExperimentSpec spec;
    spec.instance = take_instance_spec(kv);
    for (const auto& [k, v] : kv) {
        try {
            apply_run_key(spec, k, v);
        } catch (const Error& e) {
            throw Error(e.code(), k + ": " + e.what());
        }
    }
    return spec;
}

ExperimentSpec read_experiment_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::io, "cannot open " + path.string());
    return read_experiment(in);
}

void set_experiment_key(ExperimentSpec& spec, const std::string& key, const std::string& value) {
    // Instance keys go through the instance parser, layered over the current values.
    std::ostringstream base;
    write_instance_spec(base, spec.instance);
    std::istringstream in(base.str());
    KeyValues merged = read_key_values(in);
    try {
        if (merged.count(key)) {
            merged[key] = value;
            spec.instance = take_instance_spec(merged);
        } else {
            apply_run_key(spec, key, value);
        }
    } catch (const Error& e) {
        const std::string what = e.what();
        throw Error(e.code(), what.find(key) == std::string::npos ? key + ": " + what : what);
    }
}

void write_experiment(std::ostream& out, const ExperimentSpec& s) {
    write_instance_spec(out, s.instance);
    out << "algo=" << algorithm_name(s.algorithm) << '\n';
    if (s.eta) out << "eta=" << format_real(*s.eta) << '\n';
    out << "max_iter=" << s.max_iter << '\n'
        << "stop_sup=" << threshold_text(s.stop_sup_error) << '\n'
        << "stop_mean=" << threshold_text(s.stop_mean_error) << '\n'
        << "eval_tol=" << format_real(s.eval_tol) << '\n'
        << "snapshot_stride=" << s.snapshot_stride << '\n';
    if (!s.stop_after.empty()) out << "stop_after=" << join(s.stop_after, [](int x) { return std::to_string(x); }) << '\n';
    out << "seed=" << s.seed << '\n' << "policies=" << s.policies << '\n';
    if (!s.sizes.empty()) out << "sizes=" << join(s.sizes, [](std::size_t x) { return std::to_string(x); }) << '\n';
    if (!s.gammas.empty()) out << "gammas=" << join(s.gammas, [](double x) { return format_real(x); }) << '\n';
    if (!s.etas.empty()) out << "etas=" << join(s.etas, [](double x) { return format_real(x); }) << '\n';
}

PgProblem make_problem(const ExperimentSpec& spec) {
    const InstanceSpec& inst = spec.instance;
    if (inst.collapse) return make_collapsed_problem(inst.params, inst.variant);
    return make_problem(build_instance(inst.params, inst.variant), false);
}

PgConfig make_config(const ExperimentSpec& spec, const PgProblem& problem) {
    PgConfig c;
    c.eta = spec.effective_eta();
    c.max_iter = spec.max_iter;
    c.stop_sup_error = spec.stop_sup_error;
    c.stop_mean_error = spec.stop_mean_error;
    c.eval_tol = spec.eval_tol;
    c.snapshot_stride = spec.snapshot_stride;
    c.enforce_regime = spec.instance.params.enforce_regime;
    if (!spec.stop_after.empty()) {
        const KeyStates ks = key_states(problem.labels);
        for (int s : spec.stop_after) {
            if (s < 1 || s > ks.h) {
                throw Error(ErrorCode::invalid_argument, "stop_after index " + std::to_string(s) + " outside 1..H = " +
                                                             std::to_string(ks.h));
            }
            c.stop_after_crossing.push_back(ks.chain[static_cast<std::size_t>(s)]);
        }
    }
    return c;
}

RunResult run_experiment(const ExperimentSpec& spec) {
    const PgProblem problem = make_problem(spec);
    return run(problem, make_config(spec, problem), spec.algorithm);
}

void write_build(const std::filesystem::path& dir, const ExperimentSpec& spec) {
    const HardMdp inst = build_instance(spec.instance.params, spec.instance.variant);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error(ErrorCode::io, "cannot create " + dir.string() + ": " + ec.message());
    {
        auto out = open_out(dir / "mdp.txt");
        write_mdp_text(out, inst.mdp);
    }
    {
        auto out = open_out(dir / "layout.csv");
        write_layout_csv(out, inst.layout, inst.mdp);
    }
    auto out = open_out(dir / "params.txt");
    write_experiment(out, spec);
    if (!out) throw Error(ErrorCode::io, "write failed in " + dir.string());
}

std::vector<CheckReport> verify_instance(const ExperimentSpec& spec, std::size_t max_full_size) {
    std::vector<CheckReport> out;
    const HardMdpParams& p = spec.instance.params;
    if (p.target_size > max_full_size) {
        for (const char* name : {"optimal-values", "visitation-lower-bounds", "q-structure"}) {
            CheckReport r;
            r.name = name;
            r.property = name;
            r.status = CheckStatus::skipped;
            r.reason = "instance has " + std::to_string(p.target_size) + " states; full checks are limited to " +
                       std::to_string(max_full_size);
            out.push_back(r);
        }
        return out;
    }
    const HardMdp inst = build_instance(p, spec.instance.variant);
    OptimalValueOptions opt;
    opt.seed = spec.seed;
    out.push_back(check_optimal_values(inst, opt));
    const auto policies = random_policies(inst.mdp, spec.policies, spec.seed + 1);
    std::vector<Policy> with_uniform{softmax_policy(inst.mdp, zero_logits(inst.mdp))};
    with_uniform.insert(with_uniform.end(), policies.begin(), policies.end());
    out.push_back(check_visitation_bounds(inst, with_uniform));

    CheckReport q = check_q_structure(inst, with_uniform.front());
    for (std::size_t i = 0; i < policies.size() && !q.failed(); ++i) {
        CheckReport qi = check_q_structure(inst, policies[i]);
        if (qi.failed()) {
            if (qi.witness) qi.witness->iter = i;
            qi.notes.push_back("failing policy: random policy " + std::to_string(i));
            q = qi;
        } else {
            q.margin = std::min(q.margin, qi.margin);
        }
    }
    q.metrics.emplace_back("policies", static_cast<double>(with_uniform.size()));
    out.push_back(q);
    return out;
}

std::vector<CheckReport> verify_run(const RunResult& run) {
    std::vector<CheckReport> out = check_run_invariants(run);
    if (run.hard) {
        out.push_back(check_blowup(run));
        out.push_back(check_visitation_upper_bounds(run));
    }
    return out;
}

SweepResult run_sweep(const ExperimentSpec& spec, const std::filesystem::path& dir, unsigned jobs) {
    const std::vector<std::size_t> sizes = spec.sizes.empty() ? std::vector{spec.instance.params.target_size} : spec.sizes;
    const std::vector<double> gammas = spec.gammas.empty() ? std::vector{spec.instance.params.gamma} : spec.gammas;
    std::vector<std::optional<double>> etas;
    if (spec.etas.empty()) {
        etas.push_back(spec.eta);
    } else {
        for (double e : spec.etas) etas.emplace_back(e);
    }

    SweepResult result;
    std::vector<ExperimentSpec> specs;
    for (double g : gammas) {
        for (const auto& e : etas) {
            for (std::size_t n : sizes) {
                ExperimentSpec s = spec;
                s.sizes.clear();
                s.gammas.clear();
                s.etas.clear();
                s.instance.params.gamma = g;
                s.instance.params.target_size = n;
                s.eta = e;
                SweepPoint pt;
                pt.size = n;
                pt.gamma = g;
                pt.eta = s.effective_eta();
                pt.dir = "point_" + std::to_string(result.points.size());
                result.points.push_back(pt);
                specs.push_back(s);
            }
        }
    }

    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error(ErrorCode::io, "cannot create " + dir.string() + ": " + ec.message());

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < specs.size(); i = next++) {
            SweepPoint& pt = result.points[i];
            try {
                RunResult run = run_experiment(specs[i]);
                const auto point_dir = dir / pt.dir;
                write_run(point_dir, run);
                auto out = open_out(point_dir / "params.txt");
                write_experiment(out, specs[i]);
                pt.run = std::move(run);
                pt.ok = true;
            } catch (const std::exception& e) {
                pt.error = e.what();
            }
        }
    };
    jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(specs.size())));
    std::vector<std::thread> pool;
    for (unsigned j = 1; j < jobs; ++j) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    int max_h = 0;
    for (const auto& pt : result.points) {
        if (pt.ok) max_h = std::max(max_h, pt.run->hard ? class_sizes(*pt.run->hard).h : 0);
    }
    // Fits: linear scaling of the buffer crossing times (per gamma) and blow-up per point.
    std::map<double, std::vector<RunResult>> by_gamma;
    for (const auto& pt : result.points) {
        if (pt.ok) by_gamma[pt.gamma].push_back(*pt.run);
    }
    std::map<double, std::size_t> scaling; // gamma -> index of its scaling fit
    for (const auto& [g, runs] : by_gamma) {
        scaling[g] = result.fits.size();
        try {
            CheckReport r = check_scaling_t1(runs);
            r.name += "@gamma=" + format_real(g);
            result.fits.push_back(r);
        } catch (const std::exception& e) {
            CheckReport r;
            r.name = "t1-scaling@gamma=" + format_real(g);
            r.property = "buffer-crossing-linear-scaling";
            r.status = CheckStatus::skipped;
            r.reason = e.what();
            result.fits.push_back(r);
        }
    }
    for (const auto& pt : result.points) {
        if (!pt.ok) continue;
        CheckReport r = check_blowup(*pt.run);
        r.name += "@" + pt.dir;
        result.fits.push_back(r);
    }
    {
        auto out = open_out(dir / "aggregate.csv");
        out << "point,size,gamma,eta,status,stop_reason,iterations,final_sup_err";
        for (int s = 1; s <= max_h; ++s) out << ",t_" << s;
        out << ",slope_t1,slope_t2,error\n";
        for (const auto& pt : result.points) {
            out << pt.dir << ',' << pt.size << ',' << format_real(pt.gamma) << ',' << format_real(pt.eta) << ','
                << (pt.ok ? "ok" : "failed") << ',';
            std::map<int, std::optional<std::size_t>> times;
            if (pt.ok) {
                const RunResult& r = *pt.run;
                out << stop_reason_name(r.stop_reason) << ',' << r.total_iterations << ',' << format_real(r.final_sup_error);
                for (std::size_t i = 0; i < r.monitored_states.size(); ++i) {
                    const StateLabel& l = r.monitored_labels[i];
                    if (l.cls != StateClass::primary && l.cls != StateClass::buffer) continue;
                    if (const CrossingRecord* c = r.find_crossing(r.monitored_states[i], "tau")) times[l.index] = c->t;
                }
            } else {
                out << ",,";
            }
            for (int s = 1; s <= max_h; ++s) {
                out << ',';
                if (auto it = times.find(s); it != times.end() && it->second) out << *it->second;
            }
            for (const char* m : {"slope_t1", "slope_t2"}) {
                out << ',';
                if (auto it = scaling.find(pt.gamma); it != scaling.end()) {
                    for (const auto& [k, v] : result.fits[it->second].metrics) {
                        if (k == m && std::isfinite(v)) out << format_real(v);
                    }
                }
            }
            std::string err = pt.error;
            std::replace(err.begin(), err.end(), ',', ';');
            std::replace(err.begin(), err.end(), '\n', ' ');
            out << ',' << err << '\n';
        }
    }

    {
        auto out = open_out(dir / "fit.csv");
        out << "fit,metric,value\n";
        for (const CheckReport& r : result.fits) {
            for (const auto& [k, v] : r.metrics) {
                out << r.name << ',' << k << ',';
                if (std::isfinite(v)) out << format_real(v);
                out << '\n';
            }
        }
    }
    auto out = open_out(dir / "fits.json");
    write_reports_json(out, result.fits);
    return result;
}

} // namespace spg
