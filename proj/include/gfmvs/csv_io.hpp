#pragma once

#include <string>
#include <vector>

#include "gfmvs/phasor.hpp"
#include "gfmvs/timedomain.hpp"
#include "gfmvs/vi_design.hpp"

// Deterministic CSV emission and the matching reader. All numeric cells are
// printed with a fixed 12-significant-digit format, so identical inputs
// yield byte-identical files. Lines starting with '#' are comments (used
// for summary annotations) and are preserved by the reader.

namespace gfmvs {

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> comments;  // '#' lines, in file order
};

/// Parse a CSV file written by this module. Throws std::runtime_error on a
/// missing file or a row whose cell count differs from the header.
CsvTable read_csv(const std::string& path);

/// Numeric view of one cell. Throws std::runtime_error when the cell does
/// not parse as a double.
double csv_number(const CsvTable& t, std::size_t row, std::size_t col);

/// Column index by header name; throws std::runtime_error when absent.
std::size_t csv_column(const CsvTable& t, const std::string& name);

/// One named complex quantity of an analysis report.
struct LabeledPhasor {
    std::string name;
    Phasor value;
};

/// Columns: quantity, re, im, mag, arg_deg (scalars carry im = 0).
void write_analysis_csv(const std::string& path,
                        const std::vector<LabeledPhasor>& rows);

/// Columns: angle_deg, vi_mag_ohm, v_c_pos_V, v_c_neg_V, dev_pos_V,
/// dev_neg_V, i_max_A; a trailing comment names the best angle.
void write_sweep_csv(const std::string& path,
                     const std::vector<SweepPoint>& points,
                     double best_angle_deg);

/// Columns: time_s, v_ca, v_cb, v_cc, i_oa, i_ob, i_oc, v_c_pos_mag,
/// v_c_neg_mag, r_v, x_v; one row per controller sample.
void write_timeseries_csv(const std::string& path, const TimeSeries& ts);

}  // namespace gfmvs
