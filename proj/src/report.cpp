#include "scs/report.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace scs {

namespace {

std::string fmt(double v, int prec = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", prec, v);
    return buf;
}

std::string fmt_pm(const MeanStd& ms) { return fmt(ms.mean) + " +/- " + fmt(ms.stddev); }

std::string render_table(const std::vector<std::string>& header,
                         const std::vector<std::vector<std::string>>& rows) {
    std::vector<size_t> widths(header.size());
    for (size_t c = 0; c < header.size(); ++c) widths[c] = header[c].size();
    for (const auto& row : rows)
        for (size_t c = 0; c < row.size() && c < widths.size(); ++c)
            widths[c] = std::max(widths[c], row[c].size());

    std::ostringstream out;
    auto emit = [&](const std::vector<std::string>& cells) {
        for (size_t c = 0; c < widths.size(); ++c) {
            const std::string& cell = c < cells.size() ? cells[c] : "";
            out << cell << std::string(widths[c] - cell.size(), ' ');
            if (c + 1 < widths.size()) out << "  ";
        }
        out << '\n';
    };
    emit(header);
    size_t total = 0;
    for (size_t w : widths) total += w;
    out << std::string(total + 2 * (widths.size() - 1), '-') << '\n';
    for (const auto& row : rows) emit(row);
    return out.str();
}

std::string opt_fmt(const std::optional<double>& v) { return v ? fmt(*v) : "-"; }

struct GroupKey {
    std::string task, mode;
    int k;
    bool operator==(const GroupKey&) const = default;
};

std::vector<std::pair<GroupKey, std::vector<const RunRecord*>>> group_records(
    std::span<const RunRecord> records) {
    std::vector<std::pair<GroupKey, std::vector<const RunRecord*>>> groups;
    for (const auto& r : records) {
        const GroupKey key{r.task, r.mode, r.k};
        auto it = std::find_if(groups.begin(), groups.end(), [&](const auto& g) { return g.first == key; });
        if (it == groups.end()) {
            groups.push_back({key, {}});
            it = groups.end() - 1;
        }
        it->second.push_back(&r);
    }
    return groups;
}

}  // namespace

std::string format_summary_table(std::span<const SummaryRow> rows) {
    std::vector<std::vector<std::string>> cells;
    for (const auto& row : rows) {
        cells.push_back({row.task, row.mode, std::to_string(row.k), std::to_string(row.runs),
                         fmt_pm(row.overall), fmt_pm(row.unanimous_ratio), fmt_pm(row.unanimous_metric),
                         fmt(row.mean_lambda0, 3)});
    }
    return render_table({"task", "mode", "K", "runs", "metric", "U.R", "U.M", "mean-l0"}, cells);
}

std::string format_lambda_table(std::span<const RunRecord> records) {
    std::vector<uint64_t> seeds;
    for (const auto& r : records)
        if (std::find(seeds.begin(), seeds.end(), r.seed) == seeds.end()) seeds.push_back(r.seed);
    std::sort(seeds.begin(), seeds.end());

    std::vector<std::string> header{"task", "mode", "K"};
    for (uint64_t s : seeds) header.push_back("seed " + std::to_string(s));

    std::vector<std::vector<std::string>> cells;
    for (const auto& [key, group] : group_records(records)) {
        std::vector<std::string> row{key.task, key.mode, std::to_string(key.k)};
        for (uint64_t s : seeds) {
            auto it = std::find_if(group.begin(), group.end(),
                                   [&](const RunRecord* r) { return r->seed == s; });
            row.push_back(it != group.end() ? fmt((*it)->lambda0, 3) : "-");
        }
        cells.push_back(std::move(row));
    }
    return render_table(header, cells);
}

std::string format_reject_table(std::span<const RunRecord> records) {
    std::vector<std::vector<std::string>> cells;
    for (const auto& [key, group] : group_records(records)) {
        std::vector<double> om, ur;
        for (const RunRecord* r : group) {
            cells.push_back({r->task, r->mode, std::to_string(r->k), std::to_string(r->seed),
                             fmt(r->overall), fmt(r->unanimous_ratio), opt_fmt(r->unanimous_metric),
                             opt_fmt(r->disagreed_metric)});
            om.push_back(r->overall);
            ur.push_back(r->unanimous_ratio);
        }
        if (group.size() > 1) {
            cells.push_back({key.task, key.mode, std::to_string(key.k), "mean", fmt(mean_std(om).mean),
                             fmt(mean_std(ur).mean), "", ""});
        }
    }
    return render_table({"task", "mode", "K", "seed", "O.M", "U.R", "U.M", "D.M"}, cells);
}

std::string format_report(std::span<const RunRecord> records) {
    if (records.empty()) return "no records\n";
    const std::vector<SummaryRow> rows = summarize(records);
    std::string out = "== summary ==\n" + format_summary_table(rows);
    out += "\n== chosen lambda0 per seed ==\n" + format_lambda_table(records);
    out += "\n== unanimous/disagreed decomposition ==\n" + format_reject_table(records);
    return out;
}

}  // namespace scs
