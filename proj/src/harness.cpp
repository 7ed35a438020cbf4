#include "ntc/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

namespace ntc {

namespace {

using nlohmann::json;

template <typename T, std::size_t N>
std::size_t rank_in(const T (&order)[N], T value) {
    return static_cast<std::size_t>(std::find(std::begin(order), std::end(order), value) - std::begin(order));
}

template <typename T, std::size_t N>
void canonicalise(std::vector<T>& values, const T (&order)[N]) {
    std::sort(values.begin(), values.end(),
              [&](T a, T b) { return rank_in(order, a) < rank_in(order, b); });
    values.erase(std::unique(values.begin(), values.end()), values.end());
}

template <typename T, typename Parse>
std::vector<T> parse_names(const json& j, const char* key, Parse parse) {
    if (!j.is_array()) throw ConfigError(std::string("'") + key + "' must be an array of names");
    std::vector<T> out;
    for (const auto& item : j) {
        const auto name = item.get<std::string>();
        const auto parsed = parse(name);
        if (!parsed) throw ConfigError(std::string("unknown ") + key + " entry '" + name + "'");
        out.push_back(*parsed);
    }
    return out;
}

void overlay_tre(const json& j, TreConfig& c) {
    for (const auto& [key, value] : j.items()) {
        if (key == "epochs") c.epochs = value.get<std::size_t>();
        else if (key == "learning_rate") c.learning_rate = value.get<double>();
        else if (key == "weight_decay") c.weight_decay = value.get<double>();
        else if (key == "hidden") c.hidden = value.get<std::size_t>();
        else if (key == "pad_variable_length") c.pad_variable_length = value.get<bool>();
        else throw ConfigError("unknown tre key '" + key + "'");
    }
}

void overlay_receiver(const json& j, ReceiverConfig& c) {
    for (const auto& [key, value] : j.items()) {
        if (key == "embed_dim") c.embed_dim = value.get<std::size_t>();
        else if (key == "recurrent_hidden") c.recurrent_hidden = value.get<std::size_t>();
        else if (key == "head_hidden") c.head_hidden = value.get<std::size_t>();
        else if (key == "learning_rate") c.learning_rate = value.get<double>();
        else if (key == "weight_decay") c.weight_decay = value.get<double>();
        else if (key == "max_epochs") c.max_epochs = value.get<std::size_t>();
        else if (key == "batch_size") c.batch_size = value.get<std::size_t>();
        else if (key == "split_ratio") c.split_ratio = value.get<double>();
        else throw ConfigError("unknown receiver key '" + key + "'");
    }
}

std::size_t worker_count(const RunConfig& config, std::size_t jobs) {
    std::size_t n = config.threads;
    if (n == 0) {
        if (const char* env = std::getenv("NTC_BENCH_THREADS"); env && *env) {
            char* end = nullptr;
            const long parsed = std::strtol(env, &end, 10);
            if (*end != '\0' || parsed <= 0) throw ConfigError("NTC_BENCH_THREADS must be a positive integer");
            n = static_cast<std::size_t>(parsed);
        } else {
            n = std::max(1u, std::thread::hardware_concurrency());
        }
    }
    return std::max<std::size_t>(1, std::min(n, jobs));
}

// Rough relative cost, used only to start the slow cells first.
int cost_rank(Metric m) {
    switch (m) {
    case Metric::generalisation: return 0;
    case Metric::tre: return 1;
    default: return 2;
    }
}

std::string format_value(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

std::string fixed(double v, int digits = 2) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    std::string s = buf;
    if (s == "-0.00" || s == "-0.0" || s == "-0") s.erase(0, 1);
    return s;
}

std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

}  // namespace

std::vector<std::uint64_t> default_seeds(std::size_t n) {
    std::vector<std::uint64_t> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = i;
    return out;
}

RunConfig parse_run_config(const json& j, RunConfig base) {
    if (!j.is_object()) throw ConfigError("run configuration must be a JSON object");
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "protocols") {
                base.protocols = parse_names<Family>(value, "protocols", parse_family);
            } else if (key == "metrics") {
                base.metrics = parse_names<Metric>(value, "metrics", parse_metric);
            } else if (key == "compositions" || key == "tre_compositions") {
                base.compositions = parse_names<Composition>(value, "compositions", parse_composition);
            } else if (key == "colours" || key == "n_colours") {
                base.n_colours = value.get<std::size_t>();
            } else if (key == "shapes" || key == "n_shapes") {
                base.n_shapes = value.get<std::size_t>();
            } else if (key == "seeds") {
                base.seeds = value.is_array() ? value.get<std::vector<std::uint64_t>>()
                                              : default_seeds(value.get<std::size_t>());
            } else if (key == "out") {
                base.out = value.get<std::string>();
            } else if (key == "plot") {
                base.plot = value.get<std::string>();
            } else if (key == "threads") {
                base.threads = value.get<std::size_t>();
            } else if (key == "tre") {
                overlay_tre(value, base.tre);
            } else if (key == "receiver") {
                overlay_receiver(value, base.receiver);
            } else {
                throw ConfigError("unknown configuration key '" + key + "'");
            }
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed configuration: ") + e.what());
    }
    return base;
}

void validate(const RunConfig& config) {
    if (config.protocols.empty()) throw ConfigError("no protocols requested");
    if (config.metrics.empty()) throw ConfigError("no metrics requested");
    if (config.seeds.empty()) throw ConfigError("no seeds requested");
    if (config.n_colours == 0 || config.n_shapes == 0) throw ConfigError("concept space sizes must be positive");
    if (std::find(config.metrics.begin(), config.metrics.end(), Metric::tre) != config.metrics.end() &&
        config.compositions.empty()) {
        throw ConfigError("TRE requested without a composition");
    }
}

MetricScore score_cell(const Protocol& protocol, Metric metric, std::optional<Composition> composition,
                       std::uint64_t seed, const RunConfig& config) {
    switch (metric) {
    case Metric::topsim: return topographic_similarity(protocol);
    case Metric::posdis: return positional_disentanglement(protocol);
    case Metric::bosdis: return bow_disentanglement(protocol);
    case Metric::context_independence: return context_independence(protocol);
    case Metric::conflict_count: return conflict_count(protocol);
    case Metric::generalisation: {
        ReceiverConfig rc = config.receiver;
        rc.seed = seed * kGeneralisationSeeds;  // disjoint receiver seeds per cell seed
        return generalisation(protocol, rc);
    }
    case Metric::tre: {
        TreConfig tc = config.tre;
        tc.composition = composition.value_or(Composition::linear);
        tc.seed = seed;
        return {Metric::tre, tre_fit(protocol, tc).tre, orientation_of(Metric::tre)};
    }
    }
    throw std::logic_error("unhandled metric");
}

ScoreTable run_matrix(const RunConfig& input) {
    validate(input);
    RunConfig config = input;
    canonicalise(config.protocols, kAllFamilies);
    canonicalise(config.metrics, kAllMetrics);
    canonicalise(config.compositions, kAllCompositions);
    std::sort(config.seeds.begin(), config.seeds.end());
    config.seeds.erase(std::unique(config.seeds.begin(), config.seeds.end()), config.seeds.end());

    ScoreTable table;

    // Protocols are cheap; build them up front so cells only read them.
    std::map<std::pair<Family, std::uint64_t>, Protocol> protocols;
    std::map<Family, std::string> build_errors;
    for (auto family : config.protocols) {
        std::string note;
        try {
            const auto space = space_for_family(family, config.n_colours, config.n_shapes, &note);
            if (!note.empty()) table.notes.push_back(note);
            for (auto seed : config.seeds) {
                protocols.emplace(std::pair{family, seed}, generate(family, space, seed));
            }
        } catch (const std::exception& e) {
            build_errors[family] = e.what();
        }
    }

    for (auto family : config.protocols) {
        for (auto metric : config.metrics) {
            std::vector<std::optional<Composition>> comps{std::nullopt};
            if (metric == Metric::tre) comps.assign(config.compositions.begin(), config.compositions.end());
            for (auto comp : comps) {
                for (auto seed : config.seeds) {
                    table.rows.push_back({family, metric, comp, seed, std::nullopt, orientation_of(metric), {}});
                }
            }
        }
    }

    std::vector<std::size_t> order(table.rows.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return cost_rank(table.rows[a].metric) < cost_rank(table.rows[b].metric);
    });

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t k = next++; k < order.size(); k = next++) {
            ScoreRow& row = table.rows[order[k]];  // each row is touched by exactly one worker
            if (auto it = build_errors.find(row.protocol); it != build_errors.end()) {
                row.error = it->second;
                continue;
            }
            try {
                const auto& protocol = protocols.at({row.protocol, row.seed});
                row.value = score_cell(protocol, row.metric, row.composition, row.seed, config).value;
            } catch (const std::exception& e) {
                row.value.reset();
                row.error = e.what();
                if (row.error.empty()) row.error = "unknown failure";
            }
        }
    };
    const std::size_t n_workers = worker_count(config, order.size());
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < n_workers; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    for (const auto& row : table.rows) {
        if (row.error.empty()) continue;
        std::string cell = std::string(family_name(row.protocol)) + "," + std::string(metric_name(row.metric));
        if (row.composition) cell += "," + std::string(composition_name(*row.composition));
        table.notes.push_back("error [" + cell + ", seed " + std::to_string(row.seed) + "]: " + row.error);
    }
    return table;
}

ScoreTable run_ablation(RunConfig config) {
    config.metrics = {Metric::tre};
    return run_matrix(config);
}

std::string render_csv(const ScoreTable& table) {
    std::ostringstream out;
    out << "protocol,metric,composition,seed,value,orientation,defined\n";
    for (const auto& row : table.rows) {
        out << family_name(row.protocol) << ',' << metric_name(row.metric) << ','
            << (row.composition ? composition_name(*row.composition) : "") << ',' << row.seed << ','
            << (row.value ? format_value(*row.value) : "") << ',' << orientation_name(row.orientation)
            << ',' << (row.defined() ? "true" : "false") << '\n';
    }
    return out.str();
}

namespace {

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << content;
    if (!out) throw std::runtime_error("failed writing " + path);
}

}  // namespace

void emit_csv(const ScoreTable& table, const std::string& path) {
    if (table.rows.empty()) throw std::invalid_argument("refusing to write an empty score table");
    write_file(path, render_csv(table));
}

void emit_notes(const ScoreTable& table, const std::string& path) {
    std::string content;
    for (const auto& n : table.notes) content += n + "\n";
    write_file(path, content);
}

std::string render_svg(const ScoreTable& table, PlotLayout layout) {
    if (table.rows.empty()) throw std::invalid_argument("nothing to plot");

    struct Panel {
        std::string title;
        std::vector<Family> protocols;
        std::map<Family, std::vector<double>> values;  // plotted (sign-adjusted) values
    };
    std::vector<Panel> panels;
    auto panel_for = [&](const std::string& title) -> Panel& {
        for (auto& p : panels) {
            if (p.title == title) return p;
        }
        panels.push_back({title, {}, {}});
        return panels.back();
    };
    for (const auto& row : table.rows) {
        if (layout == PlotLayout::by_composition && row.metric != Metric::tre) continue;
        std::string title;
        if (layout == PlotLayout::by_metric) {
            title = std::string(metric_name(row.metric));
            if (row.composition) {
                title += " (" + std::string(composition_name(*row.composition)) + ")";
            }
        } else {
            title = "tre (" + std::string(composition_name(row.composition.value_or(Composition::linear))) + ")";
        }
        if (row.orientation == Orientation::lower) title = "-" + title;
        Panel& panel = panel_for(title);
        if (std::find(panel.protocols.begin(), panel.protocols.end(), row.protocol) == panel.protocols.end()) {
            panel.protocols.push_back(row.protocol);
        }
        auto& vals = panel.values[row.protocol];
        if (row.value) vals.push_back(row.orientation == Orientation::lower ? -*row.value : *row.value);
    }
    if (panels.empty()) throw std::invalid_argument("nothing to plot");

    const int cols = static_cast<int>(std::min<std::size_t>(panels.size(), 4));
    const int rows = static_cast<int>((panels.size() + static_cast<std::size_t>(cols) - 1) /
                                      static_cast<std::size_t>(cols));
    std::size_t max_protocols = 0;
    for (const auto& p : panels) max_protocols = std::max(max_protocols, p.protocols.size());
    const int label_w = 130, plot_w = 200, pad = 20, bar_h = 18, top = 40, axis_h = 30;
    const int panel_w = label_w + plot_w + pad;
    const int panel_h = top + static_cast<int>(max_protocols) * bar_h + axis_h;
    const int width = cols * panel_w + pad;
    const int height = rows * panel_h + pad;

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
        << "\" viewBox=\"0 0 " << width << ' ' << height << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

    for (std::size_t k = 0; k < panels.size(); ++k) {
        const Panel& panel = panels[k];
        const int ox = pad + static_cast<int>(k % static_cast<std::size_t>(cols)) * panel_w;
        const int oy = pad / 2 + static_cast<int>(k / static_cast<std::size_t>(cols)) * panel_h;
        const int px = ox + label_w;

        double lo = 0.0, hi = 0.0;
        for (const auto& [family, vals] : panel.values) {
            for (double v : vals) {
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
        }
        if (hi - lo < 1e-12) hi = lo + 1.0;
        auto sx = [&](double v) { return px + (v - lo) / (hi - lo) * plot_w; };

        svg << "<g>\n<text x=\"" << px + plot_w / 2 << "\" y=\"" << oy + 18
            << "\" text-anchor=\"middle\" font-weight=\"bold\">" << xml_escape(panel.title) << "</text>\n";
        const int plot_h = static_cast<int>(panel.protocols.size()) * bar_h;
        svg << "<line x1=\"" << fixed(sx(0.0)) << "\" y1=\"" << oy + top - 4 << "\" x2=\"" << fixed(sx(0.0))
            << "\" y2=\"" << oy + top + plot_h << "\" stroke=\"#444\"/>\n";
        for (std::size_t r = 0; r < panel.protocols.size(); ++r) {
            const Family family = panel.protocols[r];
            const int y = oy + top + static_cast<int>(r) * bar_h;
            svg << "<text x=\"" << px - 6 << "\" y=\"" << y + bar_h - 5 << "\" text-anchor=\"end\">"
                << family_name(family) << "</text>\n";
            const auto it = panel.values.find(family);
            if (it == panel.values.end() || it->second.empty()) {
                svg << "<text x=\"" << fixed(sx(0.0) + 4) << "\" y=\"" << y + bar_h - 5
                    << "\" fill=\"#a00\" font-style=\"italic\">n/a</text>\n";
                continue;
            }
            const auto& vals = it->second;
            double mean = 0.0;
            for (double v : vals) mean += v;
            mean /= static_cast<double>(vals.size());
            const auto [mn, mx] = std::minmax_element(vals.begin(), vals.end());
            const double x0 = std::min(sx(0.0), sx(mean));
            const double w = std::abs(sx(mean) - sx(0.0));
            svg << "<rect x=\"" << fixed(x0) << "\" y=\"" << y + 3 << "\" width=\"" << fixed(w)
                << "\" height=\"" << bar_h - 6 << "\" fill=\"" << (family == Family::tc ? "#55a868" : is_ntc(family) ? "#4c72b0" : "#999999")
                << "\"><title>" << format_value(mean) << "</title></rect>\n";
            const double wy = y + bar_h / 2.0;
            svg << "<line x1=\"" << fixed(sx(*mn)) << "\" y1=\"" << fixed(wy) << "\" x2=\"" << fixed(sx(*mx))
                << "\" y2=\"" << fixed(wy) << "\" stroke=\"black\"/>\n";
            for (double v : {*mn, *mx}) {
                svg << "<line x1=\"" << fixed(sx(v)) << "\" y1=\"" << fixed(wy - 4) << "\" x2=\"" << fixed(sx(v))
                    << "\" y2=\"" << fixed(wy + 4) << "\" stroke=\"black\"/>\n";
            }
        }
        const int ay = oy + top + plot_h;
        svg << "<line x1=\"" << px << "\" y1=\"" << ay << "\" x2=\"" << px + plot_w << "\" y2=\"" << ay
            << "\" stroke=\"#444\"/>\n";
        for (double v : {lo, hi}) {
            svg << "<text x=\"" << fixed(sx(v)) << "\" y=\"" << ay + 14 << "\" text-anchor=\"middle\">"
                << fixed(v) << "</text>\n";
        }
        svg << "</g>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

void emit_plot(const ScoreTable& table, const std::string& path, PlotLayout layout) {
    write_file(path, render_svg(table, layout));
}

}  // namespace ntc
