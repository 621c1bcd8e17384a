#include "stackgen/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>

namespace stackgen {

namespace {

void check_labels(const Vector& labels) {
    bool pos = false, neg = false;
    for (Eigen::Index i = 0; i < labels.size(); ++i) {
        if (labels(i) == 1.0) pos = true;
        else if (labels(i) == 0.0) neg = true;
        else fail(ErrorCode::data, "labels must be 0 or 1");
    }
    if (!pos || !neg) fail(ErrorCode::data, "ROC needs both classes among the labels");
}

struct Sources {
    std::vector<std::string> labels;  // STACKING first
    Vector weights;
};

// Predictions of STACKING followed by each learner for one partition.
std::vector<Vector> partition_predictions(const StackModel& model, const Matrix& base) {
    std::vector<Vector> out;
    Vector stacked = combine(model, base);
    if (model.task() == Task::classify) stacked = stacked.cwiseMax(0.0).cwiseMin(1.0);
    out.push_back(std::move(stacked));
    for (Eigen::Index j = 0; j < base.cols(); ++j) out.push_back(base.col(j));
    return out;
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
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

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
    return out + "\"";
}

std::string num(double v) { return fmt("%.17g", v); }

// Minimal fixed-size SVG canvas with a data rectangle.
class Svg {
public:
    Svg(double x0, double x1, double y0, double y1, const PlotOptions& opt, const std::string& default_title,
        const std::string& xlabel, const std::string& ylabel)
        : x0_(x0), x1_(x1 > x0 ? x1 : x0 + 1.0), y0_(y0), y1_(y1 > y0 ? y1 : y0 + 1.0) {
        body_ += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"480\" height=\"480\" viewBox=\"0 0 480 480\">\n";
        body_ += "<rect x=\"0\" y=\"0\" width=\"480\" height=\"480\" fill=\"white\"/>\n";
        const std::string title = opt.title.empty() ? default_title : opt.title;
        body_ += "<text class=\"title\" x=\"240\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" + xml_escape(title) + "</text>\n";
        if (!opt.subtitle.empty())
            body_ += "<text class=\"subtitle\" x=\"240\" y=\"42\" text-anchor=\"middle\" font-size=\"12\">" +
                     xml_escape(opt.subtitle) + "</text>\n";
        body_ += "<rect class=\"frame\" x=\"60\" y=\"50\" width=\"380\" height=\"360\" fill=\"none\" stroke=\"black\"/>\n";
        body_ += "<text class=\"xlabel\" x=\"250\" y=\"445\" text-anchor=\"middle\" font-size=\"12\">" +
                 xml_escape(opt.xlabel.empty() ? xlabel : opt.xlabel) + "</text>\n";
        body_ += "<text class=\"ylabel\" x=\"16\" y=\"230\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 230)\">" +
                 xml_escape(opt.ylabel.empty() ? ylabel : opt.ylabel) + "</text>\n";
        for (int t = 0; t <= 4; ++t) {
            const double fx = x0_ + (x1_ - x0_) * t / 4.0, fy = y0_ + (y1_ - y0_) * t / 4.0;
            body_ += "<text x=\"" + fmt("%.1f", px(fx)) + "\" y=\"426\" text-anchor=\"middle\" font-size=\"10\">" +
                     fmt("%.3g", fx) + "</text>\n";
            body_ += "<text x=\"56\" y=\"" + fmt("%.1f", py(fy) + 3) + "\" text-anchor=\"end\" font-size=\"10\">" +
                     fmt("%.3g", fy) + "</text>\n";
        }
    }

    double px(double x) const { return 60.0 + 380.0 * (x - x0_) / (x1_ - x0_); }
    double py(double y) const { return 410.0 - 360.0 * (y - y0_) / (y1_ - y0_); }

    void line(const char* cls, double xa, double ya, double xb, double yb, const char* colour) {
        body_ += "<line class=\"" + std::string(cls) + "\" x1=\"" + fmt("%.2f", px(xa)) + "\" y1=\"" + fmt("%.2f", py(ya)) +
                 "\" x2=\"" + fmt("%.2f", px(xb)) + "\" y2=\"" + fmt("%.2f", py(yb)) + "\" data-from=\"" + num(xa) + "," + num(ya) +
                 "\" data-to=\"" + num(xb) + "," + num(yb) + "\" stroke=\"" + colour + "\"/>\n";
    }
    void point(double x, double y) {
        body_ += "<circle class=\"point\" cx=\"" + fmt("%.2f", px(x)) + "\" cy=\"" + fmt("%.2f", py(y)) +
                 "\" r=\"1.5\" fill=\"steelblue\" fill-opacity=\"0.5\"/>\n";
    }
    void polyline(const std::vector<std::pair<double, double>>& pts) {
        body_ += "<polyline class=\"curve\" fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"";
        for (const auto& [x, y] : pts) body_ += fmt("%.2f", px(x)) + "," + fmt("%.2f", py(y)) + " ";
        body_ += "\"/>\n";
    }
    void bar(double xa, double xb, double height) {
        body_ += "<rect class=\"bar\" x=\"" + fmt("%.2f", px(xa)) + "\" y=\"" + fmt("%.2f", py(height)) + "\" width=\"" +
                 fmt("%.2f", px(xb) - px(xa)) + "\" height=\"" + fmt("%.2f", py(y0_) - py(height)) +
                 "\" fill=\"steelblue\" stroke=\"white\"/>\n";
    }
    void caption(const std::string& text) {
        body_ += "<text class=\"caption\" x=\"250\" y=\"470\" text-anchor=\"middle\" font-size=\"12\">" + xml_escape(text) +
                 "</text>\n";
    }
    std::string str() const { return body_ + "</svg>\n"; }

private:
    double x0_, x1_, y0_, y1_;
    std::string body_;
};

void write_file(const std::filesystem::path& path, const std::string& text, std::vector<std::string>& written) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::io, "cannot write '" + path.string() + "'");
    out << text;
    if (!out) fail(ErrorCode::io, "error while writing '" + path.string() + "'");
    written.push_back(path.string());
}

std::string file_label(std::string s) {
    for (char& c : s)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-') c = '_';
    return s;
}

}  // namespace

double Confusion::accuracy() const {
    const long n = total();
    return n == 0 ? 0.0 : static_cast<double>(count[0][0] + count[1][1]) / static_cast<double>(n);
}

double rmspe(const Vector& y, const Vector& pred) {
    if (y.size() != pred.size() || y.size() == 0) fail(ErrorCode::invalid_argument, "rmspe: sizes differ or are zero");
    return std::sqrt((y - pred).squaredNorm() / static_cast<double>(y.size()));
}

Confusion confusion(const Vector& y, const Vector& p, double threshold) {
    if (y.size() != p.size()) fail(ErrorCode::invalid_argument, "confusion: sizes differ");
    Confusion c;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        const int predicted = p(i) >= threshold ? 1 : 0;
        const int actual = y(i) > 0.5 ? 1 : 0;
        ++c.count[static_cast<std::size_t>(predicted)][static_cast<std::size_t>(actual)];
    }
    return c;
}

std::vector<std::string> learner_labels(const StackModel& model) {
    std::map<std::string, int> seen;
    for (const auto& l : model.spec.learners) ++seen[to_string(l.method)];
    std::vector<std::string> out;
    for (std::size_t j = 0; j < model.spec.learners.size(); ++j) {
        const std::string m = to_string(model.spec.learners[j].method);
        out.push_back(seen[m] > 1 ? m + "_" + std::to_string(j + 1) : m);
    }
    return out;
}

EvalReport evaluate(const StackModel& model, const EvalInput& in, double threshold) {
    if (static_cast<std::size_t>(in.X_train.rows()) != static_cast<std::size_t>(model.y.size()))
        fail(ErrorCode::data, "evaluation data does not match the estimation sample");
    EvalReport rep;
    rep.task = model.task();
    rep.threshold = threshold;

    std::array<std::optional<std::vector<Vector>>, 3> preds;
    std::array<const Vector*, 3> truth{&model.y, &model.y, nullptr};
    preds[in_sample] = partition_predictions(model, predict_base(model, in.X_train));
    preds[cross_validated] = partition_predictions(model, model.Z);
    if (in.X_holdout) {
        if (!in.y_holdout || in.y_holdout->size() != in.X_holdout->rows())
            fail(ErrorCode::invalid_argument, "holdout outcome missing or of wrong length");
        if (in.X_holdout->rows() == 0)
            fail(ErrorCode::data, "no holdout observations: the estimation used the whole sample");
        preds[holdout] = partition_predictions(model, predict_base(model, *in.X_holdout));
        truth[holdout] = &*in.y_holdout;
        rep.has_holdout = true;
        rep.holdout_count = static_cast<std::size_t>(in.X_holdout->rows());
    }

    const std::size_t J = model.J();
    for (std::size_t r = 0; r <= J; ++r) {
        ReportRow row;
        if (r == 0) {
            row.label = "STACKING";
        } else {
            row.label = to_string(model.spec.learners[r - 1].method);
            row.weight = model.final_fit.weights(static_cast<Eigen::Index>(r - 1));
        }
        for (int part = 0; part < 3; ++part) {
            if (!preds[static_cast<std::size_t>(part)]) continue;
            const Vector& p = (*preds[static_cast<std::size_t>(part)])[r];
            const Vector& y = *truth[static_cast<std::size_t>(part)];
            if (rep.task == Task::regress) row.rmspe[static_cast<std::size_t>(part)] = rmspe(y, p);
            else row.confusion[static_cast<std::size_t>(part)] = confusion(y, p, threshold);
        }
        rep.rows.push_back(std::move(row));
    }
    return rep;
}

EvalReport rmspe_table(const StackModel& model, const EvalInput& in) {
    if (model.task() != Task::regress) fail(ErrorCode::invalid_argument, "RMSPE table requires a regression model");
    return evaluate(model, in);
}

EvalReport confusion_table(const StackModel& model, const EvalInput& in, double threshold) {
    if (model.task() != Task::classify) fail(ErrorCode::invalid_argument, "confusion table requires a classification model");
    return evaluate(model, in, threshold);
}

std::string format_report(const EvalReport& rep) {
    std::string out;
    char line[256];
    if (rep.has_holdout) out += "Number of holdout observations: " + std::to_string(rep.holdout_count) + "\n\n";
    const auto weight = [](const ReportRow& r) { return r.weight ? fmt(" %.3f", *r.weight) : std::string("    . "); };
    if (rep.task == Task::regress) {
        static constexpr const char* widths[3] = {"%12s", "%13s", "%13s"};
        const std::string rule = std::string(17, '-') + "+" + std::string(47, '-') + "\n";
        out += "RMSPE: In-Sample, CV, Holdout\n" + rule;
        out += "  Method         | Weight   In-Sample        CV         Holdout\n" + rule;
        for (const auto& r : rep.rows) {
            std::snprintf(line, sizeof line, "  %-15s|%s", r.label.c_str(), weight(r).c_str());
            out += line;
            for (std::size_t part = 0; part < 3; ++part) {
                const auto& v = r.rmspe[part];
                std::snprintf(line, sizeof line, widths[part], v ? fmt("%.3f", *v).c_str() : ".");
                out += line;
            }
            out += "\n";
        }
        return out;
    }
    static constexpr const char* widths[6] = {"%9s", "%8s", "%10s", "%8s", "%10s", "%8s"};
    const std::string rule = std::string(17, '-') + "+" + std::string(59, '-') + "\n";
    out += "Confusion matrix: In-Sample, CV, Holdout\n" + rule;
    out += "  Method         | Weight      In-Sample             CV             Holdout\n";
    out += "                 |      ";
    for (std::size_t c = 0; c < 6; ++c) {
        std::snprintf(line, sizeof line, widths[c], c % 2 == 0 ? "0" : "1");
        out += line;
    }
    out += "\n" + rule;
    for (const auto& r : rep.rows) {
        for (std::size_t predicted = 0; predicted < 2; ++predicted) {
            std::snprintf(line, sizeof line, "  %-13s%zu |%s", r.label.c_str(), predicted, weight(r).c_str());
            out += line;
            for (std::size_t c = 0; c < 6; ++c) {
                const auto& m = r.confusion[c / 2];
                const std::string v = m ? std::to_string(m->count[predicted][c % 2]) : ".";
                std::snprintf(line, sizeof line, widths[c], v.c_str());
                out += line;
            }
            out += "\n";
        }
    }
    return out;
}

RocCurve roc_curve(const Vector& scores, const Vector& labels) {
    if (scores.size() != labels.size()) fail(ErrorCode::invalid_argument, "roc: sizes differ");
    check_labels(labels);
    std::vector<Eigen::Index> order(static_cast<std::size_t>(scores.size()));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return scores(a) > scores(b); });
    const double P = labels.sum();
    const double N = static_cast<double>(labels.size()) - P;
    RocCurve c;
    c.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
    double tp = 0, fp = 0;
    for (std::size_t i = 0; i < order.size();) {
        const double s = scores(order[i]);
        while (i < order.size() && scores(order[i]) == s) {
            if (labels(order[i]) == 1.0) ++tp;
            else ++fp;
            ++i;
        }
        const RocPoint prev = c.points.back();
        RocPoint pt{fp / N, tp / P, s};
        c.auc += (pt.fpr - prev.fpr) * (pt.tpr + prev.tpr) / 2.0;
        c.points.push_back(pt);
    }
    return c;
}

double auc_pairwise(const Vector& scores, const Vector& labels) {
    if (scores.size() != labels.size()) fail(ErrorCode::invalid_argument, "auc: sizes differ");
    check_labels(labels);
    double wins = 0.0, pairs = 0.0;
    for (Eigen::Index i = 0; i < scores.size(); ++i) {
        if (labels(i) != 1.0) continue;
        for (Eigen::Index k = 0; k < scores.size(); ++k) {
            if (labels(k) != 0.0) continue;
            pairs += 1.0;
            if (scores(i) > scores(k)) wins += 1.0;
            else if (scores(i) == scores(k)) wins += 0.5;
        }
    }
    return wins / pairs;
}

std::array<long, 20> probability_histogram(const Vector& p) {
    std::array<long, 20> bins{};
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        const double v = std::clamp(p(i), 0.0, 1.0);
        const auto b = std::min<std::size_t>(19, static_cast<std::size_t>(v * 20.0));
        ++bins[b];
    }
    return bins;
}

std::vector<std::string> emit_plots(const StackModel& model, const EvalInput& in, const std::string& out_dir,
                                    const PlotOptions& opt) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec || !fs::is_directory(out_dir)) fail(ErrorCode::io, "cannot create output directory '" + out_dir + "'");

    const bool use_holdout = in.X_holdout.has_value();
    if (use_holdout && (!in.y_holdout || in.X_holdout->rows() == 0))
        fail(ErrorCode::data, "no holdout observations: the estimation used the whole sample");
    const std::string partition = use_holdout ? "holdout" : "in-sample";
    const Matrix base = predict_base(model, use_holdout ? *in.X_holdout : in.X_train);
    const Vector& y = use_holdout ? *in.y_holdout : model.y;
    const auto preds = partition_predictions(model, base);
    std::vector<std::string> labels{"STACKING"};
    for (const auto& l : learner_labels(model)) labels.push_back(l);

    std::vector<std::string> written;
    const fs::path dir(out_dir);
    const std::string sample = use_holdout ? "Holdout sample" : "Estimation sample";
    if (model.task() == Task::regress) {
        std::string csv = "observed,predicted,learner,partition\n";
        for (std::size_t s = 0; s < preds.size(); ++s)
            for (Eigen::Index i = 0; i < y.size(); ++i)
                csv += num(y(i)) + "," + num(preds[s](i)) + "," + csv_field(labels[s]) + "," + partition + "\n";
        write_file(dir / "scatter.csv", csv, written);
        const double lo = y.minCoeff(), hi = y.maxCoeff();
        for (std::size_t s = 0; s < preds.size(); ++s) {
            const double plo = std::min(lo, preds[s].minCoeff()), phi = std::max(hi, preds[s].maxCoeff());
            Svg svg(lo, hi, plo, phi, opt, labels[s] + " (" + sample + ")", "Observed", "Predicted");
            for (Eigen::Index i = 0; i < y.size(); ++i) svg.point(y(i), preds[s](i));
            svg.line("reference", lo, lo, hi, hi, "black");
            write_file(dir / ("scatter_" + file_label(labels[s]) + ".svg"), svg.str(), written);
        }
        return written;
    }

    std::string csv = "fpr,tpr,threshold,learner,partition\n";
    std::vector<RocCurve> curves;
    for (std::size_t s = 0; s < preds.size(); ++s) {
        curves.push_back(roc_curve(preds[s], y));
        for (const auto& pt : curves.back().points)
            csv += num(pt.fpr) + "," + num(pt.tpr) + "," + (std::isinf(pt.threshold) ? std::string("inf") : num(pt.threshold)) +
                   "," + csv_field(labels[s]) + "," + partition + "\n";
    }
    write_file(dir / "roc.csv", csv, written);
    for (std::size_t s = 0; s < preds.size(); ++s) {
        Svg svg(0.0, 1.0, 0.0, 1.0, opt, labels[s] + " (" + sample + ")", "1 - specificity", "Sensitivity");
        std::vector<std::pair<double, double>> pts;
        for (const auto& pt : curves[s].points) pts.emplace_back(pt.fpr, pt.tpr);
        svg.line("reference", 0.0, 0.0, 1.0, 1.0, "gray");
        svg.polyline(pts);
        svg.caption("AUC = " + fmt("%.4f", curves[s].auc));
        write_file(dir / ("roc_" + file_label(labels[s]) + ".svg"), svg.str(), written);
    }
    if (opt.histogram) {
        std::string hcsv = "bin_lower,bin_upper,count,learner,partition\n";
        for (std::size_t s = 0; s < preds.size(); ++s) {
            const auto bins = probability_histogram(preds[s]);
            const long top = std::max<long>(1, *std::max_element(bins.begin(), bins.end()));
            Svg svg(0.0, 1.0, 0.0, static_cast<double>(top), opt, labels[s] + " (" + sample + ")", "Predicted probability",
                    "Frequency");
            for (std::size_t b = 0; b < bins.size(); ++b) {
                const double a = static_cast<double>(b) / 20.0, e = static_cast<double>(b + 1) / 20.0;
                hcsv += num(a) + "," + num(e) + "," + std::to_string(bins[b]) + "," + csv_field(labels[s]) + "," + partition + "\n";
                svg.bar(a, e, static_cast<double>(bins[b]));
            }
            write_file(dir / ("hist_" + file_label(labels[s]) + ".svg"), svg.str(), written);
        }
        write_file(dir / "histogram.csv", hcsv, written);
    }
    return written;
}

}  // namespace stackgen
