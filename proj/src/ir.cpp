#include "labelflux/ir.hpp"

#include <charconv>
#include <sstream>

#include "labelflux/error.hpp"

namespace labelflux {

namespace {

std::string factor_token(const Factor& f) {
    return std::string(f.input ? "xin" : "x") + std::to_string(f.weight) + ":" + std::to_string(f.position + 1);
}

void write_factors(std::ostream& out, const std::vector<Factor>& factors) {
    for (const Factor& f : factors) out << ' ' << factor_token(f);
}

char sign_char(int sign) { return sign < 0 ? '-' : '+'; }

}  // namespace

std::string emit_ir(const ContributionProgram& program, const std::vector<std::string>& flux_names) {
    std::ostringstream out;
    out << "HEADER weights=" << program.weights.size() << " fluxes=" << program.flux_count << '\n';
    for (std::size_t j = 0; j < flux_names.size(); ++j) out << "# flux " << j + 1 << ' ' << flux_names[j] << '\n';
    for (std::size_t kk = 0; kk < program.weights.size(); ++kk) {
        const WeightProgram& wp = program.weights[kk];
        const std::size_t k = kk + 1;
        out << "DIM " << k << ' ' << wp.size << ' ' << wp.input_size << '\n';
        for (const MatrixTerm& t : wp.matrix) {
            out << "M " << k << ' ' << t.row + 1 << ' ' << t.col + 1 << ' ' << sign_char(t.sign) << ' ';
            for (std::size_t i = 0; i < t.fluxes.size(); ++i) out << (i ? "+v" : "v") << t.fluxes[i] + 1;
            out << '\n';
        }
        for (const RhsTerm& t : wp.rhs) {
            out << "B " << k << ' ' << t.row + 1 << ' ' << sign_char(t.sign) << " v" << t.flux + 1;
            write_factors(out, t.factors);
            out << '\n';
        }
        for (const FluxDerivTerm& t : wp.flux_deriv) {
            out << "DFDV " << k << ' ' << t.row + 1 << ' ' << t.flux + 1 << ' ' << sign_char(t.sign);
            write_factors(out, t.factors);
            out << '\n';
        }
        for (std::size_t l = 0; l < wp.state_deriv.size(); ++l) {
            for (const StateDerivTerm& t : wp.state_deriv[l]) {
                out << "DBDX " << k << ' ' << l + 1 << ' ' << t.row + 1 << ' ' << t.col + 1 << ' '
                    << sign_char(t.sign) << " v" << t.flux + 1;
                write_factors(out, t.factors);
                out << '\n';
            }
        }
    }
    return out.str();
}

namespace {

class IrParser {
public:
    explicit IrParser(std::string_view text) : text_(text) {}

    ContributionProgram run() {
        bool header = false;
        std::size_t start = 0;
        while (start <= text_.size()) {
            auto end = text_.find('\n', start);
            std::string_view line = text_.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start);
            ++line_no_;
            tokens_ = tokenize(line);
            if (!tokens_.empty() && tokens_[0][0] != '#') {
                const std::string& kw = tokens_[0];
                if (!header) {
                    if (kw != "HEADER") fail("expected HEADER line");
                    read_header();
                    header = true;
                } else if (kw == "DIM") {
                    read_dim();
                } else if (kw == "M") {
                    read_matrix();
                } else if (kw == "B") {
                    read_rhs();
                } else if (kw == "DFDV") {
                    read_flux_deriv();
                } else if (kw == "DBDX") {
                    read_state_deriv();
                } else {
                    fail("unknown record '" + kw + "'");
                }
            }
            if (end == std::string_view::npos) break;
            start = end + 1;
        }
        if (!header) fail("missing HEADER line");
        for (std::size_t k = 0; k < dims_seen_.size(); ++k) {
            if (!dims_seen_[k]) throw ParseError("IR: missing DIM record for weight " + std::to_string(k + 1));
        }
        return std::move(program_);
    }

private:
    std::string_view text_;
    std::size_t line_no_ = 0;
    std::vector<std::string> tokens_;
    ContributionProgram program_;
    std::vector<bool> dims_seen_;

    [[noreturn]] void fail(const std::string& msg) const {
        throw ParseError("IR line " + std::to_string(line_no_) + ": " + msg);
    }

    static std::vector<std::string> tokenize(std::string_view line) {
        std::vector<std::string> out;
        std::istringstream in{std::string(line)};
        std::string tok;
        while (in >> tok) out.push_back(tok);
        return out;
    }

    void expect_count(std::size_t min, std::size_t max) const {
        if (tokens_.size() < min || tokens_.size() > max) fail("wrong number of fields in " + tokens_[0] + " record");
    }

    std::size_t number(std::string_view tok, std::size_t lo, std::size_t hi, const char* what) const {
        std::size_t value = 0;
        auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
        if (ec != std::errc() || ptr != tok.data() + tok.size()) fail(std::string("bad ") + what + " '" + std::string(tok) + "'");
        if (value < lo || value > hi) fail(std::string(what) + " " + std::string(tok) + " out of range");
        return value;
    }

    int sign(const std::string& tok) const {
        if (tok == "+") return 1;
        if (tok == "-") return -1;
        fail("expected sign, got '" + tok + "'");
    }

    std::size_t flux(std::string_view tok) const {
        if (tok.size() < 2 || tok[0] != 'v') fail("expected flux token v<j>, got '" + std::string(tok) + "'");
        return number(tok.substr(1), 1, program_.flux_count, "flux index") - 1;
    }

    WeightProgram& weight_at(const std::string& tok, std::size_t& k) {
        k = number(tok, 1, program_.weights.size(), "weight");
        if (!dims_seen_[k - 1]) fail("record for weight " + tok + " before its DIM");
        return program_.weights[k - 1];
    }

    Factor factor(const std::string& tok, int below_or_equal) const {
        Factor f;
        std::string_view rest;
        if (tok.rfind("xin", 0) == 0) {
            f.input = true;
            rest = std::string_view(tok).substr(3);
        } else if (tok.rfind('x', 0) == 0) {
            rest = std::string_view(tok).substr(1);
        } else {
            fail("bad factor '" + tok + "'");
        }
        auto colon = rest.find(':');
        if (colon == std::string_view::npos) fail("bad factor '" + tok + "'");
        f.weight = static_cast<int>(number(rest.substr(0, colon), 1, static_cast<std::size_t>(below_or_equal), "factor weight"));
        const WeightProgram& wp = program_.weights[static_cast<std::size_t>(f.weight - 1)];
        const std::size_t limit = f.input ? wp.input_size : wp.size;
        f.position = number(rest.substr(colon + 1), 1, limit, "factor position") - 1;
        return f;
    }

    std::vector<Factor> factors(std::size_t from, std::size_t k) const {
        std::vector<Factor> out;
        for (std::size_t i = from; i < tokens_.size(); ++i) out.push_back(factor(tokens_[i], static_cast<int>(k)));
        return out;
    }

    void read_header() {
        expect_count(3, 3);
        auto field = [&](const std::string& tok, std::string_view key) {
            if (tok.rfind(key, 0) != 0) fail("expected " + std::string(key));
            return number(std::string_view(tok).substr(key.size()), 0, 1u << 20, "header value");
        };
        program_.weights.resize(field(tokens_[1], "weights="));
        program_.flux_count = field(tokens_[2], "fluxes=");
        dims_seen_.assign(program_.weights.size(), false);
    }

    void read_dim() {
        expect_count(4, 4);
        std::size_t k = number(tokens_[1], 1, program_.weights.size(), "weight");
        if (dims_seen_[k - 1]) fail("duplicate DIM for weight " + tokens_[1]);
        WeightProgram& wp = program_.weights[k - 1];
        wp.size = number(tokens_[2], 0, 1u << 28, "dimension");
        wp.input_size = number(tokens_[3], 0, 1u << 28, "dimension");
        wp.state_deriv.resize(k - 1);
        dims_seen_[k - 1] = true;
    }

    void read_matrix() {
        expect_count(6, 6);
        std::size_t k = 0;
        WeightProgram& wp = weight_at(tokens_[1], k);
        MatrixTerm t;
        t.row = number(tokens_[2], 1, wp.size, "row") - 1;
        t.col = number(tokens_[3], 1, wp.size, "column") - 1;
        t.sign = sign(tokens_[4]);
        std::string_view sum = tokens_[5];
        std::size_t start = 0;
        for (;;) {
            auto plus = sum.find('+', start);
            t.fluxes.push_back(flux(sum.substr(start, plus == std::string_view::npos ? std::string_view::npos : plus - start)));
            if (plus == std::string_view::npos) break;
            start = plus + 1;
        }
        wp.matrix.push_back(std::move(t));
    }

    void read_rhs() {
        expect_count(5, 64);
        std::size_t k = 0;
        WeightProgram& wp = weight_at(tokens_[1], k);
        RhsTerm t;
        t.row = number(tokens_[2], 1, wp.size, "row") - 1;
        t.sign = sign(tokens_[3]);
        t.flux = flux(tokens_[4]);
        t.factors = factors(5, k);
        wp.rhs.push_back(std::move(t));
    }

    void read_flux_deriv() {
        expect_count(5, 64);
        std::size_t k = 0;
        WeightProgram& wp = weight_at(tokens_[1], k);
        FluxDerivTerm t;
        t.row = number(tokens_[2], 1, wp.size, "row") - 1;
        t.flux = number(tokens_[3], 1, program_.flux_count, "flux index") - 1;
        t.sign = sign(tokens_[4]);
        t.factors = factors(5, k);
        wp.flux_deriv.push_back(std::move(t));
    }

    void read_state_deriv() {
        expect_count(7, 64);
        std::size_t k = 0;
        WeightProgram& wp = weight_at(tokens_[1], k);
        if (k < 2) fail("DBDX requires weight >= 2");
        std::size_t l = number(tokens_[2], 1, k - 1, "derivative weight");
        StateDerivTerm t;
        t.row = number(tokens_[3], 1, wp.size, "row") - 1;
        t.col = number(tokens_[4], 1, program_.weights[l - 1].size, "column") - 1;
        t.sign = sign(tokens_[5]);
        t.flux = flux(tokens_[6]);
        t.factors = factors(7, k);
        wp.state_deriv[l - 1].push_back(std::move(t));
    }
};

}  // namespace

ContributionProgram parse_ir(std::string_view text) { return IrParser(text).run(); }

std::vector<AssembledWeight> eval_ir(std::string_view text, const Eigen::VectorXd& v, const CumomerState& x,
                                     const CumomerState& x_input) {
    return assemble(parse_ir(text), v, x, x_input);
}

}  // namespace labelflux
