// MATPOWER-style case text reader.
//
// Accepted statements (anything else is a syntax error):
//   function mpc = name
//   mpc.<field> = <number> | '<string>' | [ matrix ] | { cell } ;
// Matrices: rows end with ';' or a newline, entries are separated by
// whitespace or commas. '%' starts a comment.

#include <cctype>
#include <charconv>
#include <cmath>
#include <map>
#include <numbers>
#include <string>
#include <unordered_map>

#include "scopf/errors.hpp"
#include "scopf/grid_model.hpp"

namespace scopf {

namespace {

struct Matrix {
  std::vector<std::vector<double>> rows;
  std::vector<int> row_lines;
  int line = 0;
};

struct Field {
  enum class Kind { number, string, matrix, other } kind = Kind::other;
  double number = 0.0;
  std::string text;
  Matrix matrix;
  int line = 0;
};

class Scanner {
 public:
  explicit Scanner(std::string_view src) : src_(src) {}

  std::map<std::string, Field> parse(std::string& function_name) {
    std::map<std::string, Field> fields;
    while (true) {
      skip_space(true);
      if (eof()) break;
      const int stmt_line = line_;
      const std::string word = identifier();
      if (word == "function") {
        // function mpc = name
        skip_space(false);
        const std::string out = identifier();
        skip_space(false);
        expect('=');
        skip_space(false);
        function_name = identifier();
        if (out.empty() || function_name.empty()) fail("malformed function header");
        end_statement(true);
        continue;
      }
      if (word != "mpc") fail(word.empty() ? "unexpected character '" + std::string(1, peek()) + "'"
                                           : "unexpected token '" + word + "'");
      expect('.');
      const std::string name = identifier();
      if (name.empty()) fail("expected field name after 'mpc.'");
      skip_space(false);
      expect('=');
      skip_space(true);
      Field f = value();
      f.line = stmt_line;
      end_statement(false);
      fields[name] = std::move(f);
    }
    return fields;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, line_); }
  [[nodiscard]] bool eof() const { return pos_ >= src_.size(); }
  [[nodiscard]] char peek() const { return eof() ? '\0' : src_[pos_]; }

  void advance() {
    if (src_[pos_] == '\n') ++line_;
    ++pos_;
  }

  void skip_comment() {
    while (!eof() && peek() != '\n') advance();
  }

  // Skips blanks and comments; newlines only when `newlines` is set.
  void skip_space(bool newlines) {
    while (!eof()) {
      const char c = peek();
      if (c == '%') {
        skip_comment();
      } else if (c == ' ' || c == '\t' || c == '\r' || (newlines && c == '\n')) {
        advance();
      } else if (c == '.' && src_.substr(pos_, 3) == "...") {
        skip_comment();  // line continuation
        if (!eof()) advance();
      } else {
        break;
      }
    }
  }

  std::string identifier() {
    std::string out;
    while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_')) {
      out += peek();
      advance();
    }
    return out;
  }

  void expect(char c) {
    if (peek() != c) fail(std::string("expected '") + c + "'");
    advance();
  }

  void end_statement(bool optional_semicolon) {
    skip_space(false);
    if (peek() == ';') {
      advance();
    } else if (!optional_semicolon && !eof() && peek() != '\n') {
      fail("expected ';' at end of statement");
    }
    skip_space(false);
    if (!eof() && peek() != '\n') fail("unexpected text after statement");
  }

  double number() {
    const char* first = src_.data() + pos_;
    const char* last = src_.data() + src_.size();
    if (*first == '+') ++first;
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr == first) fail("invalid number");
    const auto consumed = static_cast<std::size_t>(ptr - (src_.data() + pos_));
    for (std::size_t i = 0; i < consumed; ++i) advance();
    if (!std::isfinite(v)) fail("non-finite number");
    return v;
  }

  Field value() {
    Field f;
    const char c = peek();
    if (c == '[') {
      f.kind = Field::Kind::matrix;
      f.matrix = matrix();
    } else if (c == '\'') {
      advance();
      while (!eof() && peek() != '\'' && peek() != '\n') {
        f.text += peek();
        advance();
      }
      expect('\'');
      f.kind = Field::Kind::string;
    } else if (c == '{') {
      // cell arrays (bus names etc.) are not used; skip to the closing brace
      int depth = 0;
      do {
        if (peek() == '{') ++depth;
        if (peek() == '}') --depth;
        if (peek() == '%') {
          skip_comment();
          continue;
        }
        advance();
      } while (!eof() && depth > 0);
      if (depth != 0) fail("unterminated '{'");
      f.kind = Field::Kind::other;
    } else if (std::isdigit(static_cast<unsigned char>(c)) || c == '-' || c == '+' || c == '.') {
      f.kind = Field::Kind::number;
      f.number = number();
    } else {
      fail("expected a value");
    }
    return f;
  }

  Matrix matrix() {
    Matrix m;
    m.line = line_;
    expect('[');
    std::vector<double> row;
    int row_line = line_;
    auto close_row = [&]() {
      if (row.empty()) return;
      if (!m.rows.empty() && row.size() != m.rows.front().size())
        throw ParseError("row has " + std::to_string(row.size()) + " columns, expected " +
                             std::to_string(m.rows.front().size()),
                         row_line);
      m.rows.push_back(std::move(row));
      m.row_lines.push_back(row_line);
      row.clear();
    };
    while (true) {
      skip_space(false);
      if (eof()) fail("unterminated matrix");
      const char c = peek();
      if (c == ']') {
        advance();
        close_row();
        break;
      }
      if (c == ';' || c == '\n') {
        advance();
        close_row();
        row_line = line_;
        continue;
      }
      if (c == ',') {
        advance();
        continue;
      }
      if (row.empty()) row_line = line_;
      row.push_back(number());
    }
    return m;
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  int line_ = 1;
};

const Field& require(const std::map<std::string, Field>& fields, const std::string& name,
                     Field::Kind kind) {
  auto it = fields.find(name);
  if (it == fields.end()) throw ParseError("missing required section mpc." + name, 0);
  if (it->second.kind != kind) throw ParseError("mpc." + name + " has the wrong type", it->second.line);
  return it->second;
}

void require_columns(const Matrix& m, std::size_t cols, const std::string& name) {
  if (!m.rows.empty() && m.rows.front().size() < cols)
    throw ParseError("mpc." + name + " needs at least " + std::to_string(cols) + " columns",
                     m.row_lines.front());
}

}  // namespace

PowerSystem parse_case(std::string_view text) {
  std::string function_name;
  const auto fields = Scanner(text).parse(function_name);

  const double base = require(fields, "baseMVA", Field::Kind::number).number;
  const Matrix& bus_m = require(fields, "bus", Field::Kind::matrix).matrix;
  const Matrix& gen_m = require(fields, "gen", Field::Kind::matrix).matrix;
  const Matrix& br_m = require(fields, "branch", Field::Kind::matrix).matrix;
  const Matrix& cost_m = require(fields, "gencost", Field::Kind::matrix).matrix;
  require_columns(bus_m, 13, "bus");
  require_columns(gen_m, 10, "gen");
  require_columns(br_m, 11, "branch");
  require_columns(cost_m, 4, "gencost");
  if (!(base > 0.0)) throw ParseError("baseMVA must be positive", fields.at("baseMVA").line);

  const Matrix* ramp_m = nullptr;
  if (auto it = fields.find("ramp"); it != fields.end()) {
    if (it->second.kind != Field::Kind::matrix) throw ParseError("mpc.ramp must be a matrix", it->second.line);
    ramp_m = &it->second.matrix;
  }
  const Matrix* outage_m = nullptr;
  if (auto it = fields.find("outage"); it != fields.end()) {
    if (it->second.kind != Field::Kind::matrix) throw ParseError("mpc.outage must be a matrix", it->second.line);
    outage_m = &it->second.matrix;
    require_columns(*outage_m, 2, "outage");
  }

  PowerSystem sys;
  sys.name = function_name;
  sys.base_mva = base;
  std::vector<std::string> diag;

  std::unordered_map<long, int> bus_index;
  int slack_count = 0;
  for (std::size_t r = 0; r < bus_m.rows.size(); ++r) {
    const auto& row = bus_m.rows[r];
    Bus bus;
    bus.id = static_cast<int>(row[0]);
    const int type = static_cast<int>(row[1]);
    if (type == 3) {
      bus.kind = BusKind::slack;
      sys.slack_bus = static_cast<int>(r);
      ++slack_count;
    } else if (type == 4) {
      diag.push_back("bus " + std::to_string(bus.id) + ": isolated bus type is not supported");
    } else if (type != 1 && type != 2) {
      throw ParseError("unknown bus type " + std::to_string(type), bus_m.row_lines[r]);
    }
    bus.shunt = Complex(row[4] / base, row[5] / base);
    bus.v_max = row[11];
    bus.v_min = row[12];
    if (!bus_index.emplace(bus.id, static_cast<int>(r)).second)
      diag.push_back("duplicate bus id " + std::to_string(bus.id));
    sys.buses.push_back(bus);
    if (row[2] != 0.0 || row[3] != 0.0)
      sys.loads.push_back({static_cast<int>(r), row[2] / base, row[3] / base});
  }

  auto lookup_bus = [&](double id, const std::string& what) {
    auto it = bus_index.find(static_cast<long>(id));
    if (it == bus_index.end()) {
      diag.push_back(what + " references nonexistent bus " + std::to_string(static_cast<long>(id)));
      return -1;
    }
    return it->second;
  };

  if (cost_m.rows.size() < gen_m.rows.size())
    throw ParseError("mpc.gencost needs one row per generator", cost_m.line);
  if (ramp_m != nullptr && ramp_m->rows.size() != gen_m.rows.size())
    throw ParseError("mpc.ramp needs one row per generator", ramp_m->line);

  std::vector<int> gen_row_to_index(gen_m.rows.size(), -1);
  for (std::size_t r = 0; r < gen_m.rows.size(); ++r) {
    const auto& row = gen_m.rows[r];
    if (row[7] <= 0.0) continue;  // out of service
    Generator g;
    g.bus = lookup_bus(row[0], "generator row " + std::to_string(r + 1));
    g.p_set = row[1] / base;
    g.q_max = row[3] / base;
    g.q_min = row[4] / base;
    g.v_set = row[5];
    g.p_max = row[8] / base;
    g.p_min = row[9] / base;

    const auto& c = cost_m.rows[r];
    if (static_cast<int>(c[0]) != 2)
      throw ParseError("only polynomial gencost (model 2) is supported", cost_m.row_lines[r]);
    const int ncoef = static_cast<int>(c[3]);
    if (ncoef < 1 || ncoef > 3 || c.size() < static_cast<std::size_t>(4 + ncoef))
      throw ParseError("gencost needs 1 to 3 polynomial coefficients", cost_m.row_lines[r]);
    double coef[3] = {0.0, 0.0, 0.0};  // c2, c1, c0
    for (int i = 0; i < ncoef; ++i) coef[3 - ncoef + i] = c[4 + i];
    g.cost = {coef[0] * base * base, coef[1] * base, coef[2]};
    if (ramp_m != nullptr) g.ramp = ramp_m->rows[r][0];

    gen_row_to_index[r] = sys.n_gen();
    sys.generators.push_back(g);
  }

  std::vector<int> branch_row_to_index(br_m.rows.size(), -1);
  for (std::size_t r = 0; r < br_m.rows.size(); ++r) {
    const auto& row = br_m.rows[r];
    if (row[10] == 0.0) continue;
    Branch br;
    br.from = lookup_bus(row[0], "branch row " + std::to_string(r + 1));
    br.to = lookup_bus(row[1], "branch row " + std::to_string(r + 1));
    const Complex z(row[2], row[3]);
    br.series = z == Complex(0.0, 0.0) ? Complex(0.0, 0.0) : 1.0 / z;
    br.charging = row[4];
    br.tap = row[8] == 0.0 ? 1.0 : row[8];
    br.shift = row[9] * std::numbers::pi / 180.0;
    branch_row_to_index[r] = sys.n_branch();
    sys.branches.push_back(br);
  }

  // Bus kinds follow the in-service generators.
  for (auto& bus : sys.buses)
    if (bus.kind == BusKind::pv) bus.kind = BusKind::pq;
  for (const auto& g : sys.generators)
    if (g.bus >= 0 && sys.buses[g.bus].kind == BusKind::pq) sys.buses[g.bus].kind = BusKind::pv;
  if (slack_count == 0) diag.emplace_back("no slack bus (type 3)");

  if (outage_m == nullptr) {
    for (int b = 0; b < sys.n_branch(); ++b) sys.outage_devices.push_back({DeviceKind::branch, b});
    for (int g = 0; g < sys.n_gen(); ++g) sys.outage_devices.push_back({DeviceKind::generator, g});
  } else {
    for (auto& br : sys.branches) br.outage_eligible = false;
    for (std::size_t r = 0; r < outage_m->rows.size(); ++r) {
      const auto& row = outage_m->rows[r];
      const int type = static_cast<int>(row[0]);
      const long idx = static_cast<long>(row[1]) - 1;
      const auto& map = type == 1 ? branch_row_to_index : gen_row_to_index;
      if (type != 1 && type != 2)
        throw ParseError("outage type must be 1 (branch) or 2 (generator)", outage_m->row_lines[r]);
      if (idx < 0 || idx >= static_cast<long>(map.size()) || map[idx] < 0) {
        diag.push_back("outage row " + std::to_string(r + 1) + " references a missing or out-of-service device");
        continue;
      }
      sys.outage_devices.push_back(
          {type == 1 ? DeviceKind::branch : DeviceKind::generator, map[idx]});
    }
  }
  for (int b = 0; b < sys.n_branch(); ++b) sys.branches[b].outage_eligible = false;
  for (const auto& dev : sys.outage_devices)
    if (dev.kind == DeviceKind::branch) sys.branches[dev.index].outage_eligible = true;

  if (diag.empty()) diag = validate_system(sys);
  if (!diag.empty()) throw SemanticError(diag);
  return sys;
}

}  // namespace scopf
