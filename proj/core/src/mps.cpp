#include <cstdio>
#include <ostream>
#include <string>

#include "tclcoord/milp.hpp"

namespace tclcoord {

namespace {

// Fixed MPS field layout (1-based columns): field 1 at 2-3, field 2 at
// 5-12, field 3 at 15-22, field 4 at 25-36, field 5 at 40-47, field 6 at
// 50-61.  docs/mps-format.md carries the full description.

std::string pad(const std::string& s, size_t width) {
  std::string r = s.substr(0, width);
  r.resize(width, ' ');
  return r;
}

std::string num12(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return pad(buf, 12);
}

std::string row_name(int i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "R%07d", i);
  return buf;
}

std::string col_name(int j) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "C%07d", j);
  return buf;
}

void entry_line(std::ostream& os, const std::string& f2, const std::string& f3,
                double value) {
  os << "    " << pad(f2, 8) << "  " << pad(f3, 8) << "  " << num12(value) << "\n";
}

}  // namespace

void write_fixed_mps(const MilpModel& model, std::ostream& os, const std::string& name) {
  model.validate();
  os << "* sense: " << (model.sense == ObjSense::Minimize ? "MINIMIZE" : "MAXIMIZE") << "\n";
  for (int j = 0; j < model.num_vars; ++j)
    if (!model.var_names[j].empty())
      os << "* " << col_name(j) << " = " << model.var_names[j] << "\n";
  os << "NAME          " << name << "\n";

  os << "ROWS\n";
  os << " N  COST\n";
  for (int i = 0; i < model.num_rows(); ++i) {
    char type = 'E';
    if (model.constraints[i].rel == Relation::LessEq) type = 'L';
    else if (model.constraints[i].rel == Relation::GreaterEq) type = 'G';
    os << " " << type << "  " << row_name(i) << "\n";
  }

  os << "COLUMNS\n";
  bool in_int = false;
  int marker = 0;
  for (int j = 0; j < model.num_vars; ++j) {
    if (static_cast<bool>(model.integral[j]) != in_int) {
      in_int = !in_int;
      os << "    " << pad("MARKER" + std::to_string(marker++), 8) << "  "
         << pad("'MARKER'", 8) << "  " << pad(in_int ? "'INTORG'" : "'INTEND'", 12)
         << "\n";
    }
    if (model.objective[j] != 0.0) entry_line(os, col_name(j), "COST", model.objective[j]);
    for (int i = 0; i < model.num_rows(); ++i) {
      double v = model.constraints[i].coeffs[j];
      if (v != 0.0) entry_line(os, col_name(j), row_name(i), v);
    }
  }
  if (in_int)
    os << "    " << pad("MARKER" + std::to_string(marker++), 8) << "  "
       << pad("'MARKER'", 8) << "  " << pad("'INTEND'", 12) << "\n";

  os << "RHS\n";
  for (int i = 0; i < model.num_rows(); ++i)
    if (model.constraints[i].rhs != 0.0) entry_line(os, "RHS", row_name(i), model.constraints[i].rhs);

  os << "BOUNDS\n";
  for (int j = 0; j < model.num_vars; ++j) {
    if (model.lower[j] == model.upper[j]) {
      os << " FX " << pad("BND", 8) << "  " << pad(col_name(j), 8) << "  "
         << num12(model.lower[j]) << "\n";
      continue;
    }
    os << " LO " << pad("BND", 8) << "  " << pad(col_name(j), 8) << "  "
       << num12(model.lower[j]) << "\n";
    os << " UP " << pad("BND", 8) << "  " << pad(col_name(j), 8) << "  "
       << num12(model.upper[j]) << "\n";
  }
  os << "ENDATA\n";
}

}  // namespace tclcoord
