#include "gfmvs/csv_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace gfmvs {

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    return out;
}

}  // namespace

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error(path + ": cannot open");
    CsvTable t;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line.front() == '#') {
            t.comments.push_back(line);
            continue;
        }
        if (t.header.empty()) {
            t.header = split(line);
            continue;
        }
        auto cells = split(line);
        if (cells.size() != t.header.size()) {
            throw std::runtime_error(path + ": row with " +
                                     std::to_string(cells.size()) +
                                     " cells, header has " +
                                     std::to_string(t.header.size()));
        }
        t.rows.push_back(std::move(cells));
    }
    if (t.header.empty()) throw std::runtime_error(path + ": no header row");
    return t;
}

double csv_number(const CsvTable& t, std::size_t row, std::size_t col) {
    const std::string& cell = t.rows.at(row).at(col);
    try {
        std::size_t used = 0;
        const double v = std::stod(cell, &used);
        if (used != cell.size()) throw std::invalid_argument(cell);
        return v;
    } catch (const std::exception&) {
        throw std::runtime_error("cell '" + cell + "' is not a number");
    }
}

std::size_t csv_column(const CsvTable& t, const std::string& name) {
    for (std::size_t i = 0; i < t.header.size(); ++i) {
        if (t.header[i] == name) return i;
    }
    throw std::runtime_error("no column named '" + name + "'");
}

void write_analysis_csv(const std::string& path,
                        const std::vector<LabeledPhasor>& rows) {
    std::ofstream out = open_out(path);
    out << "quantity,re,im,mag,arg_deg\n";
    for (const auto& r : rows) {
        out << r.name << ',' << fmt(r.value.real()) << ','
            << fmt(r.value.imag()) << ',' << fmt(std::abs(r.value)) << ','
            << fmt(std::abs(r.value) > 0.0 ? arg_deg(r.value) : 0.0) << '\n';
    }
}

void write_sweep_csv(const std::string& path,
                     const std::vector<SweepPoint>& points,
                     double best_angle_deg) {
    std::ofstream out = open_out(path);
    out << "angle_deg,vi_mag_ohm,v_c_pos_V,v_c_neg_V,dev_pos_V,dev_neg_V,"
           "i_max_A\n";
    for (const auto& p : points) {
        out << fmt(p.angle_deg) << ',' << fmt(p.vi_magnitude) << ','
            << fmt(p.v_c_pos_mag) << ',' << fmt(p.v_c_neg_mag) << ','
            << fmt(p.dev_pos) << ',' << fmt(p.dev_neg) << ','
            << fmt(p.i_max) << '\n';
    }
    out << "# best_angle_deg = " << fmt(best_angle_deg) << '\n';
}

void write_timeseries_csv(const std::string& path, const TimeSeries& ts) {
    std::ofstream out = open_out(path);
    out << "time_s,v_ca,v_cb,v_cc,i_oa,i_ob,i_oc,v_c_pos_mag,v_c_neg_mag,"
           "r_v,x_v\n";
    for (std::size_t k = 0; k < ts.time_s.size(); ++k) {
        out << fmt(ts.time_s[k]) << ',' << fmt(ts.v_c[k][0]) << ','
            << fmt(ts.v_c[k][1]) << ',' << fmt(ts.v_c[k][2]) << ','
            << fmt(ts.i_o[k][0]) << ',' << fmt(ts.i_o[k][1]) << ','
            << fmt(ts.i_o[k][2]) << ',' << fmt(ts.v_c_pos_mag[k]) << ','
            << fmt(ts.v_c_neg_mag[k]) << ',' << fmt(ts.r_v[k]) << ','
            << fmt(ts.x_v[k]) << '\n';
    }
}

}  // namespace gfmvs
