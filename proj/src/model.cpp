#include "ufgkit/model.hpp"

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace ufg {

namespace {

std::string trim(const std::string& s) {
  size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

[[noreturn]] void fail(int line, Errc code, const std::string& msg) {
  throw Error(code, "line " + std::to_string(line) + ": " + msg);
}

double parse_number(const std::string& s, int line) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || s.empty()) fail(line, Errc::parse_error, "bad number '" + s + "'");
  return v;
}

long parse_long(const std::string& s, int line) {
  char* end = nullptr;
  const long v = std::strtol(s.c_str(), &end, 10);
  if (end != s.c_str() + s.size() || s.empty()) fail(line, Errc::parse_error, "bad integer '" + s + "'");
  return v;
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

std::string format_number(double v) {
  char buf[40];
  if (v == static_cast<long long>(v) && std::abs(v) < 1e15)
    std::snprintf(buf, sizeof buf, "%lld", static_cast<long long>(v));
  else
    std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Line {
  int number;
  std::string text;
};

// A raw section: header (empty for the preamble) plus its lines.
struct Section {
  std::string header;
  int header_line = 0;
  std::vector<Line> lines;
};

std::vector<Section> split_sections(const std::string& text) {
  std::vector<Section> out;
  out.push_back({});
  std::istringstream in(text);
  std::string raw;
  int number = 0;
  while (std::getline(in, raw)) {
    ++number;
    std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail(number, Errc::parse_error, "unterminated section header");
      out.push_back({trim(line.substr(1, line.size() - 2)), number, {}});
    } else {
      out.back().lines.push_back({number, line});
    }
  }
  return out;
}

std::pair<std::string, std::string> split_key_value(const Line& l) {
  const size_t eq = l.text.find('=');
  if (eq == std::string::npos) fail(l.number, Errc::parse_error, "expected 'key = value'");
  return {trim(l.text.substr(0, eq)), trim(l.text.substr(eq + 1))};
}

int field_index(const std::string& name, int line, int d) {
  if (name.size() < 2 || name[0] != 'V') fail(line, Errc::parse_error, "expected field name V<k>");
  for (size_t i = 1; i < name.size(); ++i)
    if (!std::isdigit(static_cast<unsigned char>(name[i])))
      fail(line, Errc::parse_error, "expected field name V<k>");
  const int k = std::atoi(name.c_str() + 1);
  if (k < 0 || k > d) fail(line, Errc::dimension_mismatch, "field " + name + " out of range");
  return k;
}

}  // namespace

ModelFile parse_model(const std::string& text) {
  ModelFile m;
  const std::vector<Section> sections = split_sections(text);

  bool saw_dim = false, saw_noise = false;
  for (const Line& l : sections[0].lines) {
    const auto [key, value] = split_key_value(l);
    if (key == "name") {
      m.name = value;
    } else if (key == "dim") {
      m.dim = static_cast<int>(parse_long(value, l.number));
      saw_dim = true;
    } else if (key == "noise") {
      m.d = static_cast<int>(parse_long(value, l.number));
      saw_noise = true;
    } else {
      fail(l.number, Errc::parse_error, "unknown top-level key '" + key + "'");
    }
  }
  if (!saw_dim || m.dim < 1) fail(1, Errc::parse_error, "missing or invalid 'dim'");
  if (!saw_noise || m.d < 0) fail(1, Errc::parse_error, "missing or invalid 'noise'");
  if (m.name.empty()) m.name = "model";

  m.field_text.assign(static_cast<size_t>(m.d + 1), {});
  std::vector<bool> have_field(static_cast<size_t>(m.d + 1), false);

  for (size_t s = 1; s < sections.size(); ++s) {
    const Section& sec = sections[s];
    if (sec.header == "params") {
      for (const Line& l : sec.lines) {
        const auto [key, value] = split_key_value(l);
        const double v = parse_number(value, l.number);
        if (!(v > 0.0)) fail(l.number, Errc::invalid_argument, "parameter '" + key + "' must be positive");
        m.params.emplace_back(key, v);
      }
    } else if (sec.header.rfind("field ", 0) == 0) {
      const int k = field_index(trim(sec.header.substr(6)), sec.header_line, m.d);
      if (have_field[static_cast<size_t>(k)])
        fail(sec.header_line, Errc::parse_error, "duplicate field section");
      if (static_cast<int>(sec.lines.size()) != m.dim)
        fail(sec.header_line, Errc::dimension_mismatch,
             "field V" + std::to_string(k) + " needs exactly " + std::to_string(m.dim) +
                 " component expressions, got " + std::to_string(sec.lines.size()));
      for (const Line& l : sec.lines) m.field_text[static_cast<size_t>(k)].push_back(l.text);
      have_field[static_cast<size_t>(k)] = true;
    } else if (sec.header == "f") {
      if (sec.lines.size() != 1) fail(sec.header_line, Errc::parse_error, "[f] needs one expression line");
      m.f_text = sec.lines[0].text;
    } else if (sec.header.rfind("certificate ", 0) == 0) {
      const std::string key = trim(sec.header.substr(12));
      std::vector<std::string> rows;
      for (const Line& l : sec.lines) rows.push_back(l.text);
      m.certificate.emplace_back(key, std::move(rows));
    } else if (sec.header == "run") {
      for (const Line& l : sec.lines) {
        const auto [key, value] = split_key_value(l);
        if (key == "m") {
          m.run.m = static_cast<int>(parse_long(value, l.number));
          if (m.run.m < 1) fail(l.number, Errc::invalid_argument, "m must be >= 1");
        } else if (key == "x0") {
          m.run.x0.clear();
          for (const std::string& part : split_commas(value))
            m.run.x0.push_back(parse_number(part, l.number));
        } else if (key == "t_grid") {
          const std::vector<std::string> parts = split_commas(value);
          if (parts.size() != 3) fail(l.number, Errc::parse_error, "t_grid = start, end, step");
          m.run.t_start = parse_number(parts[0], l.number);
          m.run.t_end = parse_number(parts[1], l.number);
          m.run.t_step = parse_number(parts[2], l.number);
        } else if (key == "paths") {
          m.run.paths = parse_long(value, l.number);
        } else if (key == "dt") {
          m.run.dt = parse_number(value, l.number);
        } else if (key == "seed") {
          m.run.seed = static_cast<std::uint64_t>(parse_long(value, l.number));
        } else if (key == "h") {
          m.run.h = parse_number(value, l.number);
        } else if (key == "tol") {
          m.run.tol = parse_number(value, l.number);
        } else {
          fail(l.number, Errc::parse_error, "unknown run key '" + key + "'");
        }
      }
    } else if (sec.header == "chain") {
      for (const Line& l : sec.lines) {
        std::istringstream ls(l.text);
        std::string fname;
        std::string dur;
        ls >> fname >> dur;
        if (fname.empty() || dur.empty()) fail(l.number, Errc::parse_error, "chain line: V<k> <duration>");
        m.chain.emplace_back(field_index(fname, l.number, m.d), parse_number(dur, l.number));
      }
    } else {
      fail(sec.header_line, Errc::parse_error, "unknown section [" + sec.header + "]");
    }
  }

  for (int k = 0; k <= m.d; ++k)
    if (!have_field[static_cast<size_t>(k)])
      fail(1, Errc::parse_error, "missing [field V" + std::to_string(k) + "]");

  if (m.run.x0.empty()) m.run.x0.assign(static_cast<size_t>(m.dim), 0.0);
  if (static_cast<int>(m.run.x0.size()) != m.dim)
    fail(1, Errc::dimension_mismatch, "x0 needs exactly " + std::to_string(m.dim) + " coordinates");
  if (!(m.run.dt > 0.0)) fail(1, Errc::invalid_argument, "dt must be positive");
  if (!(m.run.t_step > 0.0) || m.run.t_end < m.run.t_start)
    fail(1, Errc::invalid_argument, "t_grid must be increasing with positive step");
  if (m.run.paths < 2) fail(1, Errc::invalid_argument, "paths must be >= 2");

  // Validate every expression now so errors surface at parse time.
  const VarSpace space = model_space(m);
  for (int k = 0; k <= m.d; ++k)
    for (const std::string& comp : m.field_text[static_cast<size_t>(k)]) (void)parse_expr(comp, space);
  if (!m.f_text.empty()) {
    const ScalarFunc f = parse_scalar(m.f_text, space);
    if (!f.structurally_bounded(space))
      throw Error(Errc::invalid_argument,
                  "test function must be bounded (tanh/sin/cos/abs of coordinates)");
  }
  for (const auto& [key, rows] : m.certificate) {
    (void)MultiIndex::parse(key);
    for (const std::string& row : rows) (void)parse_expr(row, space);
  }
  return m;
}

std::string serialize_model(const ModelFile& m) {
  std::ostringstream out;
  out << "name = " << m.name << "\n";
  out << "dim = " << m.dim << "\n";
  out << "noise = " << m.d << "\n";
  if (!m.params.empty()) {
    out << "\n[params]\n";
    for (const auto& [key, value] : m.params) out << key << " = " << format_number(value) << "\n";
  }
  for (int k = 0; k <= m.d; ++k) {
    out << "\n[field V" << k << "]\n";
    for (const std::string& comp : m.field_text[static_cast<size_t>(k)]) out << comp << "\n";
  }
  if (!m.f_text.empty()) out << "\n[f]\n" << m.f_text << "\n";
  for (const auto& [key, rows] : m.certificate) {
    out << "\n[certificate " << key << "]\n";
    for (const std::string& row : rows) out << row << "\n";
  }
  out << "\n[run]\n";
  out << "m = " << m.run.m << "\n";
  out << "x0 = ";
  for (size_t i = 0; i < m.run.x0.size(); ++i)
    out << (i ? ", " : "") << format_number(m.run.x0[i]);
  out << "\n";
  out << "t_grid = " << format_number(m.run.t_start) << ", " << format_number(m.run.t_end) << ", "
      << format_number(m.run.t_step) << "\n";
  out << "paths = " << m.run.paths << "\n";
  out << "dt = " << format_number(m.run.dt) << "\n";
  out << "seed = " << m.run.seed << "\n";
  out << "h = " << format_number(m.run.h) << "\n";
  out << "tol = " << format_number(m.run.tol) << "\n";
  if (!m.chain.empty()) {
    out << "\n[chain]\n";
    for (const auto& [field, duration] : m.chain)
      out << "V" << field << " " << format_number(duration) << "\n";
  }
  return out.str();
}

ModelFile load_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io_error, "cannot open model file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_model(buf.str());
}

VarSpace model_space(const ModelFile& m) {
  VarSpace space;
  space.dim = m.dim;
  for (const auto& [key, value] : m.params) space.params.push_back(key);
  return space;
}

std::vector<VectorField> model_fields(const ModelFile& m) {
  const VarSpace space = model_space(m);
  std::vector<VectorField> out;
  out.reserve(m.field_text.size());
  for (const auto& comps : m.field_text) {
    VectorField f = VectorField::zero(m.dim);
    for (int c = 0; c < m.dim; ++c) f.comp[static_cast<size_t>(c)] = parse_expr(comps[static_cast<size_t>(c)], space);
    out.push_back(std::move(f));
  }
  return out;
}

std::vector<double> model_param_values(const ModelFile& m) {
  std::vector<double> out;
  out.reserve(m.params.size());
  for (const auto& [key, value] : m.params) out.push_back(value);
  return out;
}

ScalarFunc model_function(const ModelFile& m) {
  const VarSpace space = model_space(m);
  if (!m.f_text.empty()) return parse_scalar(m.f_text, space);
  return parse_scalar("tanh(" + space.var_name(0) + ")", space);
}

std::vector<double> model_time_grid(const ModelFile& m) {
  std::vector<double> grid;
  for (double t = m.run.t_start; t <= m.run.t_end + 1e-12; t += m.run.t_step) grid.push_back(t);
  return grid;
}

}  // namespace ufg
