#include "alrl/harness/emit.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include "alrl/errors.hpp"

namespace alrl::harness {

namespace {

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

std::string fixed2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

void write_series(std::ostream& out, const std::string& run, std::span<const double> raw) {
    const auto sm = smooth(raw);
    for (std::size_t i = 0; i < raw.size(); ++i) out << run << ',' << i + 1 << ',' << num(raw[i]) << ',' << num(sm[i]) << '\n';
}

}  // namespace

void write_curves_csv(std::ostream& out, const EvalCurve& curve) {
    out << "run,x,f1_raw,f1_smoothed\n";
    for (std::size_t r = 0; r < curve.runs.size(); ++r) write_series(out, std::to_string(r), curve.runs[r].f1);
    write_series(out, "mean", curve.mean);
}

void write_training_log_csv(std::ostream& out, std::span<const TrainLogRow> rows) {
    out << "interaction,game,loss,reward,tau,lr\n";
    for (const auto& r : rows) {
        out << r.interaction << ',' << r.game << ',' << num(r.loss) << ',' << num(r.reward) << ',' << num(r.tau) << ','
            << num(r.lr) << '\n';
    }
}

void write_games_csv(std::ostream& out, std::span<const GameSummary> games) {
    out << "game,interactions,cumulated_reward,cumulated_loss,added_images,final_f1\n";
    for (const auto& g : games) {
        out << g.game << ',' << g.interactions << ',' << num(g.cumulated_reward) << ',' << num(g.cumulated_loss) << ','
            << g.added_images << ',' << num(g.final_f1) << '\n';
    }
}

void write_sweep_csv(std::ostream& out, std::span<const SweepPoint> points) {
    out << "feature,name,action,sample,value,q\n";
    for (const auto& p : points) {
        out << p.feature << ',' << p.feature_name << ',' << p.action << ',' << p.sample << ',' << num(p.value) << ','
            << num(p.q) << '\n';
    }
}

std::vector<TableRow> comparison_table(std::span<const EvalCurve> curves, std::span<const int> checkpoints) {
    std::vector<TableRow> rows;
    for (const auto& c : curves) {
        TableRow row{c.strategy, {}};
        for (int x : checkpoints) row.values.push_back(checkpoint_value(c.smoothed, x));
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_table_csv(std::ostream& out, std::span<const TableRow> rows, std::span<const int> checkpoints) {
    out << "strategy";
    for (int x : checkpoints) out << ",f1@" << x;
    out << '\n';
    for (const auto& r : rows) {
        out << r.strategy;
        for (double v : r.values) out << ',' << fixed2(v);
        out << '\n';
    }
}

std::string format_table(std::span<const TableRow> rows, std::span<const int> checkpoints) {
    std::size_t name_width = 8;
    for (const auto& r : rows) name_width = std::max(name_width, r.strategy.size());
    std::ostringstream o;
    o << std::string(name_width, ' ');
    for (int x : checkpoints) {
        const auto h = std::to_string(x);
        o << "  " << std::string(h.size() < 6 ? 6 - h.size() : 0, ' ') << h;
    }
    o << '\n';
    for (const auto& r : rows) {
        o << r.strategy << std::string(name_width - r.strategy.size(), ' ');
        for (double v : r.values) o << "  " << "  " << fixed2(v);
        o << '\n';
    }
    return o.str();
}

void write_svg_plot(std::ostream& out, std::span<const EvalCurve> curves, const std::string& title) {
    constexpr double W = 640, H = 400, L = 60, R = 150, T = 40, B = 50;
    static const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"};
    std::size_t xmax = 1;
    double ymin = 1.0, ymax = 0.0;
    for (const auto& c : curves) {
        xmax = std::max(xmax, c.smoothed.size());
        for (double v : c.smoothed) {
            ymin = std::min(ymin, v);
            ymax = std::max(ymax, v);
        }
    }
    if (ymin > ymax) ymin = 0.0, ymax = 1.0;
    ymin = std::max(0.0, ymin - 0.02);
    ymax = std::min(1.0, ymax + 0.02);
    if (ymax - ymin < 1e-6) ymax = ymin + 0.1;
    auto px = [&](double x) { return L + (W - L - R) * (x - 1) / std::max<double>(1.0, static_cast<double>(xmax - 1)); };
    auto py = [&](double y) { return H - B - (H - T - B) * (y - ymin) / (ymax - ymin); };

    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << title << "</text>\n"
        << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n"
        << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n"
        << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">added images</text>\n"
        << "<text x=\"16\" y=\"" << (T + H - B) / 2 << "\" transform=\"rotate(-90 16 " << (T + H - B) / 2
        << ")\" text-anchor=\"middle\">F1 (smoothed)</text>\n";
    for (int i = 0; i <= 4; ++i) {
        const double y = ymin + (ymax - ymin) * i / 4;
        out << "<text x=\"" << L - 6 << "\" y=\"" << py(y) + 4 << "\" text-anchor=\"end\">" << fixed2(y) << "</text>\n";
        const double x = 1 + static_cast<double>(xmax - 1) * i / 4;
        out << "<text x=\"" << px(x) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">" << static_cast<long>(x + 0.5) << "</text>\n";
    }
    for (std::size_t c = 0; c < curves.size(); ++c) {
        const char* color = colors[c % std::size(colors)];
        out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < curves[c].smoothed.size(); ++i) {
            out << num(px(static_cast<double>(i + 1))) << ',' << num(py(curves[c].smoothed[i])) << ' ';
        }
        out << "\"/>\n";
        const double ly = T + 16.0 * static_cast<double>(c);
        out << "<line x1=\"" << W - R + 10 << "\" y1=\"" << ly << "\" x2=\"" << W - R + 30 << "\" y2=\"" << ly
            << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n"
            << "<text x=\"" << W - R + 36 << "\" y=\"" << ly + 4 << "\">" << curves[c].strategy << "</text>\n";
    }
    out << "</svg>\n";
}

std::size_t CsvTable::column(const std::string& name) const {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ConfigError("no column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
}

CsvTable read_csv(std::istream& in) {
    auto split = [](const std::string& line) {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
        if (!line.empty() && line.back() == ',') cells.emplace_back();
        return cells;
    };
    CsvTable t;
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty CSV", 0);
    t.header = split(line);
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto cells = split(line);
        if (cells.size() != t.header.size()) {
            throw ParseError("CSV line " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                                 " fields, expected " + std::to_string(t.header.size()),
                             line_no);
        }
        t.rows.push_back(std::move(cells));
    }
    return t;
}

void write_file(const std::filesystem::path& path, const std::function<void(std::ostream&)>& write) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    write(out);
    out.flush();
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace alrl::harness
