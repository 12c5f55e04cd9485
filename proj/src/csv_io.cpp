#include <charconv>
#include <cmath>
#include <map>
#include <ostream>

#include "recur/csv.hpp"
#include "recur/data_model.hpp"
#include "recur/errors.hpp"

namespace recur {
namespace csv {

bool read_record(std::istream& in, std::vector<std::string>& fields) {
    fields.clear();
    std::string field;
    bool in_quotes = false;
    bool any = false;
    int ch;
    while ((ch = in.get()) != EOF) {
        any = true;
        char c = static_cast<char>(ch);
        if (in_quotes) {
            if (c == '"') {
                if (in.peek() == '"') {
                    field += '"';
                    in.get();
                } else {
                    in_quotes = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"') {
            in_quotes = true;
        } else if (c == ',') {
            fields.push_back(field);
            field.clear();
        } else if (c == '\n') {
            break;
        } else if (c != '\r') {
            field += c;
        }
    }
    if (!any) return false;
    fields.push_back(field);
    return true;
}

std::string quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string num(double x) {
    if (std::isnan(x)) return "NA";
    if (std::isinf(x)) return x > 0 ? "Inf" : "-Inf";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

}  // namespace csv

namespace {

struct Header {
    std::map<std::string, std::size_t> pos;

    std::size_t need(const std::string& name) const {
        auto it = pos.find(name);
        if (it == pos.end()) throw Error(ErrorCode::BAD_INPUT, "missing column " + name);
        return it->second;
    }
    bool has(const std::string& name) const { return pos.count(name) > 0; }
};

Header read_header(std::istream& in) {
    std::vector<std::string> f;
    if (!csv::read_record(in, f)) throw Error(ErrorCode::BAD_INPUT, "empty file");
    Header h;
    for (std::size_t i = 0; i < f.size(); ++i) {
        std::string name = f[i];
        if (i == 0 && name.size() >= 3 && name.compare(0, 3, "\xEF\xBB\xBF") == 0) name = name.substr(3);
        h.pos[name] = i;
    }
    return h;
}

double to_double(const std::string& s, std::size_t line, const char* col) {
    double v = 0.0;
    const char* b = s.data();
    const char* e = s.data() + s.size();
    while (b < e && *b == ' ') ++b;
    auto res = std::from_chars(b, e, v);
    if (res.ec != std::errc() || res.ptr != e) {
        throw Error(ErrorCode::BAD_INPUT, "line " + std::to_string(line) + ": bad " + col + " '" + s + "'");
    }
    return v;
}

int to_int(const std::string& s, std::size_t line, const char* col) {
    double v = to_double(s, line, col);
    if (v != std::floor(v)) {
        throw Error(ErrorCode::BAD_INPUT, "line " + std::to_string(line) + ": " + col + " not an integer");
    }
    return static_cast<int>(v);
}

template <class F>
void for_each_record(std::istream& in, std::size_t ncol, F&& f) {
    std::vector<std::string> rec;
    std::size_t line = 1;
    while (csv::read_record(in, rec)) {
        ++line;
        if (rec.size() == 1 && rec[0].empty()) continue;
        if (rec.size() < ncol) {
            throw Error(ErrorCode::BAD_INPUT, "line " + std::to_string(line) + ": too few fields");
        }
        f(rec, line);
    }
}

}  // namespace

RecurrentEventTable read_event_csv(std::istream& in) {
    Header h = read_header(in);
    std::size_t cid = h.need("USUBJID"), carm = h.need("ARMCD"), cstart = h.need("TSTART"),
                cstop = h.need("TSTOP"), cev = h.need("EVENT"), cs = h.need("SEVENT"), cn = h.need("NEVENTS");
    bool has_gap = h.has("TGAP");
    std::size_t cgap = has_gap ? h.need("TGAP") : 0;
    RecurrentEventTable t;
    for_each_record(in, h.pos.size(), [&](const std::vector<std::string>& r, std::size_t line) {
        EventRow row;
        row.id = r[cid];
        row.arm = to_int(r[carm], line, "ARMCD");
        row.tstart = to_double(r[cstart], line, "TSTART");
        row.tstop = to_double(r[cstop], line, "TSTOP");
        row.event = to_int(r[cev], line, "EVENT");
        row.sevent = to_int(r[cs], line, "SEVENT");
        row.nevents = to_int(r[cn], line, "NEVENTS");
        if (has_gap) {
            double gap = to_double(r[cgap], line, "TGAP");
            if (std::fabs(gap - row.tgap()) > 1e-9 * std::max(1.0, std::fabs(row.tstop))) {
                throw Error(ErrorCode::BAD_INPUT, "line " + std::to_string(line) + ": TGAP != TSTOP - TSTART");
            }
        }
        t.rows.push_back(std::move(row));
    });
    return t;
}

void write_event_csv(std::ostream& out, const RecurrentEventTable& table) {
    out << "USUBJID,ARMCD,TSTART,TSTOP,TGAP,EVENT,SEVENT,NEVENTS\n";
    for (const auto& r : table.rows) {
        out << csv::quote(r.id) << ',' << r.arm << ',' << csv::num(r.tstart) << ',' << csv::num(r.tstop) << ','
            << csv::num(r.tgap()) << ',' << r.event << ',' << r.sevent << ',' << r.nevents << '\n';
    }
}

WlwTable read_wlw_csv(std::istream& in) {
    Header h = read_header(in);
    std::size_t cid = h.need("USUBJID"), carm = h.need("ARMCD"), cstop = h.need("TSTOP"), cev = h.need("EVENT"),
                cs = h.need("SEVENT");
    WlwTable t;
    for_each_record(in, h.pos.size(), [&](const std::vector<std::string>& r, std::size_t line) {
        WlwRow row;
        row.id = r[cid];
        row.arm = to_int(r[carm], line, "ARMCD");
        row.tstop = to_double(r[cstop], line, "TSTOP");
        row.event = to_int(r[cev], line, "EVENT");
        row.sevent = to_int(r[cs], line, "SEVENT");
        t.K = std::max(t.K, row.sevent);
        t.rows.push_back(std::move(row));
    });
    return t;
}

void write_wlw_csv(std::ostream& out, const WlwTable& table) {
    out << "USUBJID,ARMCD,TSTOP,EVENT,SEVENT\n";
    for (const auto& r : table.rows) {
        out << csv::quote(r.id) << ',' << r.arm << ',' << csv::num(r.tstop) << ',' << r.event << ',' << r.sevent
            << '\n';
    }
}

std::vector<EdssPanel> read_edss_csv(std::istream& in) {
    Header h = read_header(in);
    std::size_t cid = h.need("USUBJID"), carm = h.need("ARMCD"), cdy = h.need("DY"), cav = h.need("AVAL");
    std::vector<EdssPanel> panels;
    for_each_record(in, h.pos.size(), [&](const std::vector<std::string>& r, std::size_t line) {
        if (panels.empty() || panels.back().id != r[cid]) {
            EdssPanel p;
            p.id = r[cid];
            p.arm = to_int(r[carm], line, "ARMCD");
            panels.push_back(std::move(p));
        }
        auto& p = panels.back();
        int dy = to_int(r[cdy], line, "DY");
        if (!p.days.empty() && dy <= p.days.back()) {
            throw Error(ErrorCode::BAD_INPUT, "line " + std::to_string(line) + ": DY not strictly increasing");
        }
        p.days.push_back(dy);
        p.scores.push_back(to_double(r[cav], line, "AVAL"));
    });
    return panels;
}

void write_edss_csv(std::ostream& out, const std::vector<EdssPanel>& panels) {
    out << "USUBJID,ARMCD,DY,AVAL\n";
    for (const auto& p : panels) {
        for (std::size_t k = 0; k < p.days.size(); ++k) {
            out << csv::quote(p.id) << ',' << p.arm << ',' << p.days[k] << ',' << csv::num(p.scores[k]) << '\n';
        }
    }
}

}  // namespace recur
