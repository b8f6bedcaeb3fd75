#include "spg/trace_io.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace spg {

using nlohmann::json;

namespace {

constexpr const char* kTraceHeader = "iter,state,class,V,theta_a0,theta_a1,theta_a2,pi_a1,d,sup_err,mean_err";
constexpr const char* kCrossingHeader = "state,threshold_name,threshold_value,t";

std::string cell(double x) { return std::isnan(x) ? std::string() : format_real(x); }

double parse_cell(const std::string& s) {
    return s.empty() ? std::numeric_limits<double>::quiet_NaN() : parse_real(s);
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

json real_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

double real_from(const json& j, double fallback) { return j.is_null() ? fallback : j.get<double>(); }

std::string label_text(const RunResult& run, std::size_t i) {
    if (run.monitored_labels.empty() || !run.hard) return "";
    return class_name(run.monitored_labels[i]);
}

json extremum_json(const Extremum& e) {
    json j{{"value", real_or_null(e.value)}, {"iter", e.iter}, {"state", e.state}};
    j["action"] = e.action ? json(*e.action) : json(nullptr);
    return j;
}

Extremum extremum_from(const json& j, double fallback) {
    Extremum e;
    e.value = real_from(j.at("value"), fallback);
    e.iter = j.at("iter").get<std::size_t>();
    e.state = j.at("state").get<StateId>();
    if (!j.at("action").is_null()) e.action = j.at("action").get<ActionId>();
    return e;
}

json params_json(const HardMdpParams& p) {
    return {{"gamma", p.gamma}, {"size", p.target_size}, {"c_h", p.c_h},   {"c_b1", p.c_b1},
            {"c_b2", p.c_b2},   {"c_m", p.c_m},          {"c_p", p.c_p},   {"enforce_regime", p.enforce_regime}};
}

HardMdpParams params_from(const json& j) {
    HardMdpParams p;
    p.gamma = j.at("gamma").get<double>();
    p.target_size = j.at("size").get<std::size_t>();
    p.c_h = j.at("c_h").get<double>();
    p.c_b1 = j.at("c_b1").get<double>();
    p.c_b2 = j.at("c_b2").get<double>();
    p.c_m = j.at("c_m").get<double>();
    p.c_p = j.at("c_p").get<double>();
    p.enforce_regime = j.at("enforce_regime").get<bool>();
    return p;
}

std::ifstream open_in(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw Error(ErrorCode::io, "cannot open " + p.string());
    return in;
}

std::ofstream open_out(const std::filesystem::path& p) {
    std::ofstream out(p);
    if (!out) throw Error(ErrorCode::io, "cannot write " + p.string());
    return out;
}

} // namespace

void write_trace_csv(std::ostream& out, const RunResult& run) {
    out << kTraceHeader << '\n';
    for (const IterationSnapshot& snap : run.snapshots) {
        for (std::size_t i = 0; i < snap.states.size(); ++i) {
            const StateSnapshot& st = snap.states[i];
            out << snap.iter << ',' << st.state << ',' << label_text(run, i) << ',' << cell(st.v) << ','
                << cell(st.theta[0]) << ',' << cell(st.theta[1]) << ',' << cell(st.theta[2]) << ',' << cell(st.pi_a1)
                << ',' << cell(st.d) << ',' << cell(snap.sup_error) << ',' << cell(snap.mean_error) << '\n';
        }
    }
}

void write_trace_jsonl(std::ostream& out, const RunResult& run) {
    for (const IterationSnapshot& snap : run.snapshots) {
        json states = json::array();
        for (std::size_t i = 0; i < snap.states.size(); ++i) {
            const StateSnapshot& st = snap.states[i];
            json theta = json::array(), pi_hat = json::array();
            for (int a = 0; a < 3; ++a) {
                theta.push_back(real_or_null(st.theta[static_cast<std::size_t>(a)]));
                pi_hat.push_back(real_or_null(st.pi_hat[static_cast<std::size_t>(a)]));
            }
            states.push_back({{"state", st.state},
                              {"class", label_text(run, i)},
                              {"V", st.v},
                              {"theta", theta},
                              {"pi_hat", pi_hat},
                              {"pi_a1", real_or_null(st.pi_a1)},
                              {"d", st.d}});
        }
        json line{{"iter", snap.iter}, {"sup_err", snap.sup_error}, {"mean_err", snap.mean_error}, {"states", states}};
        out << line.dump() << '\n';
    }
}

void write_crossings_csv(std::ostream& out, const RunResult& run) {
    out << kCrossingHeader << '\n';
    for (const CrossingRecord& c : run.crossings) {
        out << c.state << ',' << c.threshold_name << ',' << format_real(c.threshold) << ',';
        if (c.t) out << *c.t;
        out << '\n';
    }
}

void write_summary_json(std::ostream& out, const RunResult& run) {
    json j;
    j["algorithm"] = algorithm_name(run.algorithm);
    j["eta"] = run.eta;
    j["gamma"] = run.gamma;
    j["eval_tol"] = run.eval_tol;
    j["uniform_init"] = run.uniform_init;
    j["collapsed"] = run.collapsed;
    j["num_states"] = run.num_states;
    j["full_size"] = run.full_size;
    j["instance"] = run.hard ? params_json(*run.hard) : json(nullptr);
    j["variant"] = variant_name(run.variant);
    j["monitored_states"] = run.monitored_states;
    json classes = json::array();
    for (std::size_t i = 0; i < run.monitored_states.size(); ++i) classes.push_back(label_text(run, i));
    j["monitored_classes"] = classes;
    j["stop_sup_error"] = run.stop_sup_error ? json(*run.stop_sup_error) : json(nullptr);
    j["stop_mean_error"] = run.stop_mean_error ? json(*run.stop_mean_error) : json(nullptr);
    j["max_iter"] = run.max_iter;
    j["stop_reason"] = stop_reason_name(run.stop_reason);
    j["total_iterations"] = run.total_iterations;
    j["wall_seconds"] = run.wall_seconds;
    j["final_sup_error"] = run.final_sup_error;
    j["final_mean_error"] = run.final_mean_error;
    json ordering = json::array();
    for (const OrderingTrace& tr : run.monitor.ordering) {
        ordering.push_back({{"state", tr.state},
                            {"chain_index", tr.chain_index},
                            {"min_margin", real_or_null(tr.min_margin)},
                            {"min_iter", tr.min_iter},
                            {"window_end", tr.window_end ? json(*tr.window_end) : json(nullptr)}});
    }
    j["invariants"] = {{"min_delta_v", extremum_json(run.monitor.min_delta_v)},
                       {"min_delta_q", extremum_json(run.monitor.min_delta_q)},
                       {"min_v", extremum_json(run.monitor.min_v)},
                       {"max_logit_sum", extremum_json(run.monitor.max_logit_sum)},
                       {"ordering", ordering}};
    j["final_v"] = run.final_v;
    out << j.dump(2) << '\n';
}

TraceTable read_trace_csv(std::istream& in) {
    TraceTable table;
    std::string line;
    if (!std::getline(in, line) || line != kTraceHeader) {
        throw Error(ErrorCode::parse, "trace CSV: expected header '" + std::string(kTraceHeader) + "'");
    }
    std::size_t line_no = 1;
    bool any_class = false;
    std::vector<std::string> classes;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto f = split_csv(line);
        try {
            if (f.size() != 11) throw Error(ErrorCode::parse, "expected 11 fields, found " + std::to_string(f.size()));
            const std::size_t iter = parse_count(f[0]);
            StateSnapshot st;
            st.state = parse_count(f[1]);
            st.v = parse_real(f[3]);
            for (int a = 0; a < 3; ++a) st.theta[static_cast<std::size_t>(a)] = parse_cell(f[4 + static_cast<std::size_t>(a)]);
            st.pi_a1 = parse_cell(f[7]);
            st.d = parse_real(f[8]);
            double top = -std::numeric_limits<double>::infinity();
            for (double t : st.theta) {
                if (!std::isnan(t)) top = std::max(top, t);
            }
            for (std::size_t a = 0; a < 3; ++a) {
                st.pi_hat[a] = std::isnan(st.theta[a]) ? st.theta[a] : std::exp(st.theta[a] - top);
            }
            // The recorded pi(a1) must be the softmax of the recorded logits.
            if (!std::isnan(st.pi_a1)) {
                double z = 0.0;
                for (double w : st.pi_hat) z += std::isnan(w) ? 0.0 : w;
                if (std::isnan(st.pi_hat[1]) || std::abs(st.pi_hat[1] / z - st.pi_a1) > 1e-9) {
                    throw Error(ErrorCode::parse, "pi_a1 does not match the recorded logits");
                }
            }
            if (table.snapshots.empty() || table.snapshots.back().iter != iter) {
                if (!table.snapshots.empty() && table.snapshots.back().iter > iter) {
                    throw Error(ErrorCode::parse, "iterations are not increasing");
                }
                table.snapshots.push_back({iter, parse_real(f[9]), parse_real(f[10]), {}});
            }
            IterationSnapshot& snap = table.snapshots.back();
            const std::size_t pos = snap.states.size();
            if (table.snapshots.size() == 1) {
                table.states.push_back(st.state);
                classes.push_back(f[2]);
                any_class = any_class || !f[2].empty();
            } else if (pos >= table.states.size() || table.states[pos] != st.state || classes[pos] != f[2]) {
                throw Error(ErrorCode::parse, "monitored state list changes between snapshots");
            }
            if (parse_real(f[9]) != snap.sup_error || parse_real(f[10]) != snap.mean_error) {
                throw Error(ErrorCode::parse, "error columns differ within one iteration");
            }
            snap.states.push_back(st);
        } catch (const Error& e) {
            throw Error(ErrorCode::parse, "trace CSV line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    for (const auto& snap : table.snapshots) {
        if (snap.states.size() != table.states.size()) {
            throw Error(ErrorCode::parse, "trace CSV: snapshot at iteration " + std::to_string(snap.iter) +
                                              " is missing monitored states");
        }
    }
    if (any_class) {
        for (const auto& c : classes) table.labels.push_back(parse_class_name(c));
    }
    return table;
}

std::vector<CrossingRecord> read_crossings_csv(std::istream& in) {
    std::vector<CrossingRecord> out;
    std::string line;
    if (!std::getline(in, line) || line != kCrossingHeader) {
        throw Error(ErrorCode::parse, "crossing CSV: expected header '" + std::string(kCrossingHeader) + "'");
    }
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto f = split_csv(line);
        try {
            if (f.size() != 4 || f[1].empty()) throw Error(ErrorCode::parse, "malformed record");
            CrossingRecord c;
            c.state = parse_count(f[0]);
            c.threshold_name = f[1];
            c.threshold = parse_real(f[2]);
            if (!f[3].empty()) c.t = parse_count(f[3]);
            c.pi_a1 = std::numeric_limits<double>::quiet_NaN();
            c.v = std::numeric_limits<double>::quiet_NaN();
            out.push_back(c);
        } catch (const Error& e) {
            throw Error(ErrorCode::parse, "crossing CSV line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

void write_run(const std::filesystem::path& dir, const RunResult& run) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error(ErrorCode::io, "cannot create " + dir.string() + ": " + ec.message());
    {
        auto out = open_out(dir / kTraceCsv);
        write_trace_csv(out, run);
    }
    {
        auto out = open_out(dir / kTraceJsonl);
        write_trace_jsonl(out, run);
    }
    {
        auto out = open_out(dir / kCrossingsCsv);
        write_crossings_csv(out, run);
    }
    auto out = open_out(dir / kSummaryJson);
    write_summary_json(out, run);
    if (!out) throw Error(ErrorCode::io, "write failed in " + dir.string());
}

RunResult read_run(const std::filesystem::path& dir) {
    RunResult run;
    json j;
    {
        auto in = open_in(dir / kSummaryJson);
        try {
            j = json::parse(in);
        } catch (const json::exception& e) {
            throw Error(ErrorCode::parse, "summary.json: " + std::string(e.what()));
        }
    }
    try {
        run.algorithm = parse_algorithm(j.at("algorithm").get<std::string>());
        run.eta = j.at("eta").get<double>();
        run.gamma = j.at("gamma").get<double>();
        run.eval_tol = j.at("eval_tol").get<double>();
        run.uniform_init = j.at("uniform_init").get<bool>();
        run.collapsed = j.at("collapsed").get<bool>();
        run.num_states = j.at("num_states").get<std::size_t>();
        run.full_size = j.at("full_size").get<double>();
        if (!j.at("instance").is_null()) run.hard = params_from(j.at("instance"));
        run.variant = parse_variant(j.at("variant").get<std::string>());
        run.monitored_states = j.at("monitored_states").get<std::vector<StateId>>();
        if (run.hard) {
            for (const auto& c : j.at("monitored_classes")) run.monitored_labels.push_back(parse_class_name(c.get<std::string>()));
        }
        if (!j.at("stop_sup_error").is_null()) run.stop_sup_error = j.at("stop_sup_error").get<double>();
        if (!j.at("stop_mean_error").is_null()) run.stop_mean_error = j.at("stop_mean_error").get<double>();
        run.max_iter = j.at("max_iter").get<std::size_t>();
        run.stop_reason = parse_stop_reason(j.at("stop_reason").get<std::string>());
        run.total_iterations = j.at("total_iterations").get<std::size_t>();
        run.wall_seconds = j.at("wall_seconds").get<double>();
        run.final_sup_error = j.at("final_sup_error").get<double>();
        run.final_mean_error = j.at("final_mean_error").get<double>();
        const json& inv = j.at("invariants");
        const double inf = std::numeric_limits<double>::infinity();
        run.monitor.min_delta_v = extremum_from(inv.at("min_delta_v"), inf);
        run.monitor.min_delta_q = extremum_from(inv.at("min_delta_q"), inf);
        run.monitor.min_v = extremum_from(inv.at("min_v"), inf);
        run.monitor.max_logit_sum = extremum_from(inv.at("max_logit_sum"), inf);
        for (const auto& o : inv.at("ordering")) {
            OrderingTrace tr;
            tr.state = o.at("state").get<StateId>();
            tr.chain_index = o.at("chain_index").get<int>();
            tr.min_margin = real_from(o.at("min_margin"), inf);
            tr.min_iter = o.at("min_iter").get<std::size_t>();
            if (!o.at("window_end").is_null()) tr.window_end = o.at("window_end").get<std::size_t>();
            run.monitor.ordering.push_back(tr);
        }
        run.final_v = j.at("final_v").get<std::vector<double>>();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::parse, "summary.json: " + std::string(e.what()));
    }

    {
        auto in = open_in(dir / kTraceCsv);
        TraceTable table = read_trace_csv(in);
        if (!table.snapshots.empty() && table.states != run.monitored_states) {
            throw Error(ErrorCode::parse, "trace CSV monitors different states than summary.json");
        }
        run.snapshots = std::move(table.snapshots);
    }
    {
        auto in = open_in(dir / kCrossingsCsv);
        run.crossings = read_crossings_csv(in);
    }
    for (CrossingRecord& c : run.crossings) {
        if (!c.t) continue;
        auto snap = std::find_if(run.snapshots.begin(), run.snapshots.end(),
                                 [&](const IterationSnapshot& s) { return s.iter == *c.t; });
        auto pos = std::find(run.monitored_states.begin(), run.monitored_states.end(), c.state);
        if (snap == run.snapshots.end() || pos == run.monitored_states.end()) {
            throw Error(ErrorCode::parse, "no snapshot recorded at crossing iteration " + std::to_string(*c.t));
        }
        const StateSnapshot& st = snap->states[static_cast<std::size_t>(pos - run.monitored_states.begin())];
        c.pi_a1 = st.pi_a1;
        c.v = st.v;
    }
    return run;
}

} // namespace spg
