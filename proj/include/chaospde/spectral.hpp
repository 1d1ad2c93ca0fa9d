#pragma once

#include <cmath>
#include <complex>
#include <stdexcept>
#include <utility>
#include <variant>
#include <vector>

namespace chaospde {

// Fourier representation of a function on the torus [0, 2pi):
// f(x) = sum_{|q| <= Q} c_q e^{iqx}. Fields representing real functions keep
// conjugate symmetry c_{-q} = conj(c_q).
class SpectralField {
public:
    using Complex = std::complex<double>;

    SpectralField() : cutoff_(0), coeff_(1, Complex(0.0, 0.0)) {}
    explicit SpectralField(int cutoff) : cutoff_(cutoff), coeff_(static_cast<std::size_t>(2 * cutoff + 1)) {
        if (cutoff < 0) throw std::invalid_argument("SpectralField: cutoff must be nonnegative");
    }

    static SpectralField constant(double value, int cutoff) {
        SpectralField f(cutoff);
        f.at(0) = value;
        return f;
    }
    // amp * sin(q x)
    static SpectralField harmonic_sin(int q, double amp, int cutoff) {
        SpectralField f(cutoff);
        check_mode(q, cutoff);
        f.at(q) += Complex(0.0, -0.5 * amp);
        f.at(-q) += Complex(0.0, 0.5 * amp);
        return f;
    }
    // amp * cos(q x)
    static SpectralField harmonic_cos(int q, double amp, int cutoff) {
        SpectralField f(cutoff);
        check_mode(q, cutoff);
        f.at(q) += Complex(0.5 * amp, 0.0);
        f.at(-q) += Complex(0.5 * amp, 0.0);
        return f;
    }
    static void check_mode(int q, int cutoff) {
        if (q < 1 || q > cutoff) throw std::invalid_argument("SpectralField: harmonic mode outside [1, cutoff]");
    }

    int cutoff() const { return cutoff_; }
    std::size_t size() const { return coeff_.size(); }

    Complex& at(int q) { return coeff_[static_cast<std::size_t>(q + cutoff_)]; }
    const Complex& at(int q) const { return coeff_[static_cast<std::size_t>(q + cutoff_)]; }
    Complex at_or_zero(int q) const {
        if (q < -cutoff_ || q > cutoff_) return Complex(0.0, 0.0);
        return at(q);
    }

    std::vector<Complex>& raw() { return coeff_; }
    const std::vector<Complex>& raw() const { return coeff_; }

    double real_space(double x) const {
        Complex acc(0.0, 0.0);
        for (int q = -cutoff_; q <= cutoff_; ++q) acc += at(q) * std::exp(Complex(0.0, q * x));
        return acc.real();
    }

    std::vector<double> sample_real_space(std::size_t points) const {
        std::vector<double> out(points);
        for (std::size_t i = 0; i < points; ++i) out[i] = real_space(2.0 * M_PI * static_cast<double>(i) / points);
        return out;
    }

    SpectralField& operator+=(const SpectralField& other) {
        require_same_cutoff(other);
        for (std::size_t i = 0; i < coeff_.size(); ++i) coeff_[i] += other.coeff_[i];
        return *this;
    }
    SpectralField& operator-=(const SpectralField& other) {
        require_same_cutoff(other);
        for (std::size_t i = 0; i < coeff_.size(); ++i) coeff_[i] -= other.coeff_[i];
        return *this;
    }
    SpectralField& operator*=(double s) {
        for (auto& c : coeff_) c *= s;
        return *this;
    }
    friend SpectralField operator+(SpectralField a, const SpectralField& b) { return a += b; }
    friend SpectralField operator-(SpectralField a, const SpectralField& b) { return a -= b; }
    friend SpectralField operator*(double s, SpectralField f) { return f *= s; }

    void require_same_cutoff(const SpectralField& other) const {
        if (cutoff_ != other.cutoff_) throw std::invalid_argument("SpectralField: cutoff mismatch");
    }

private:
    int cutoff_;
    std::vector<Complex> coeff_;
};

// Sobolev norm on the torus: ||f||_{H^r}^2 = 2 pi sum_q (1+q^2)^r |c_q|^2.
// r = 0 is the L2 norm.
inline double sobolev_norm_sq(const SpectralField& f, double r) {
    double acc = 0.0;
    for (int q = -f.cutoff(); q <= f.cutoff(); ++q) {
        double w = r == 0.0 ? 1.0 : std::pow(1.0 + static_cast<double>(q) * q, r);
        acc += w * std::norm(f.at(q));
    }
    return 2.0 * M_PI * acc;
}

inline double sobolev_norm(const SpectralField& f, double r) { return std::sqrt(sobolev_norm_sq(f, r)); }
inline double h_norm_sq(const SpectralField& f) { return sobolev_norm_sq(f, 0.0); }
inline double h_norm(const SpectralField& f) { return std::sqrt(h_norm_sq(f)); }

// Second-order generator with spectral symbol a(q) = -q^2 + shift.
// Strong parabolicity holds with delta_A = 1, C_A = 1 + shift.
struct SpectralGenerator {
    double shift = 0.0;

    double symbol(int q) const { return -static_cast<double>(q) * q + shift; }
    double parabolicity_margin() const { return 1.0; }          // delta_A
    double parabolicity_constant() const { return 1.0 + shift; }  // C_A

    // ||A v||_H <= c ||v||_{H^2}: sup_q |a(q)| / (1+q^2) over the band.
    double h2_control_constant(int cutoff) const {
        double c = 0.0;
        for (int q = 0; q <= cutoff; ++q)
            c = std::max(c, std::fabs(symbol(q)) / (1.0 + static_cast<double>(q) * q));
        return c;
    }
};

// Semigroup e^{tA}: exact mode-wise multiplication by e^{a(q) t}.
inline SpectralField semigroup_apply(const SpectralGenerator& gen, double t, const SpectralField& v) {
    if (t < 0.0) throw std::domain_error("semigroup_apply: negative time");
    SpectralField out(v.cutoff());
    for (int q = -v.cutoff(); q <= v.cutoff(); ++q) out.at(q) = v.at(q) * std::exp(gen.symbol(q) * t);
    return out;
}

// Noise coupling operator on H: either sigma * I or multiplication by a
// bounded real function given spectrally.
struct DiagonalCoupling {
    double sigma = 1.0;
};
struct MultiplierCoupling {
    SpectralField symbol;
};

class CouplingOperator {
public:
    CouplingOperator() : op_(DiagonalCoupling{1.0}) {}
    static CouplingOperator diagonal(double sigma) { return CouplingOperator(DiagonalCoupling{sigma}); }
    static CouplingOperator multiplier(SpectralField h) { return CouplingOperator(MultiplierCoupling{std::move(h)}); }

    bool is_diagonal() const { return std::holds_alternative<DiagonalCoupling>(op_); }
    double diagonal_factor() const { return std::get<DiagonalCoupling>(op_).sigma; }
    const SpectralField& multiplier_symbol() const { return std::get<MultiplierCoupling>(op_).symbol; }

    // Operator norm on H: |sigma|, or sup_x |h(x)| estimated on a fine grid.
    double norm_h() const {
        if (is_diagonal()) return std::fabs(diagonal_factor());
        const auto& h = multiplier_symbol();
        double m = 0.0;
        const std::size_t points = 4096;
        for (std::size_t i = 0; i < points; ++i)
            m = std::max(m, std::fabs(h.real_space(2.0 * M_PI * static_cast<double>(i) / points)));
        return m;
    }

    // Operator norm on H^2 of the band-limited operator: largest singular
    // value of L = D B D^{-1}, D = diag(1+q^2), by power iteration on L*L.
    double norm_h2(int cutoff = 64) const {
        if (is_diagonal()) return std::fabs(diagonal_factor());
        const int Q = cutoff;
        const int dim = 2 * Q + 1;
        const auto& h = multiplier_symbol();
        auto weight = [Q](int idx) {
            double q = static_cast<double>(idx - Q);
            return 1.0 + q * q;
        };
        std::vector<std::complex<double>> v(static_cast<std::size_t>(dim)), w(static_cast<std::size_t>(dim));
        for (int i = 0; i < dim; ++i) v[static_cast<std::size_t>(i)] = 1.0 / weight(i);
        auto l2 = [dim](const std::vector<std::complex<double>>& x) {
            double acc = 0.0;
            for (int i = 0; i < dim; ++i) acc += std::norm(x[static_cast<std::size_t>(i)]);
            return std::sqrt(acc);
        };
        double nv = l2(v);
        for (auto& c : v) c /= nv;
        double sigma = 0.0;
        for (int iter = 0; iter < 300; ++iter) {
            for (int i = 0; i < dim; ++i) {
                std::complex<double> acc(0.0, 0.0);
                for (int j = 0; j < dim; ++j) acc += h.at_or_zero((i - Q) - (j - Q)) * v[static_cast<std::size_t>(j)] / weight(j);
                w[static_cast<std::size_t>(i)] = acc * weight(i);
            }
            double sigma_new = l2(w);
            if (sigma_new == 0.0) return 0.0;
            for (int i = 0; i < dim; ++i) {
                std::complex<double> acc(0.0, 0.0);
                for (int j = 0; j < dim; ++j)
                    acc += std::conj(h.at_or_zero((j - Q) - (i - Q))) * w[static_cast<std::size_t>(j)] * weight(j);
                v[static_cast<std::size_t>(i)] = acc / weight(i);
            }
            nv = l2(v);
            for (auto& c : v) c /= nv;
            if (iter > 5 && std::fabs(sigma_new - sigma) < 1e-12 * sigma_new) return sigma_new;
            sigma = sigma_new;
        }
        return sigma;
    }

    SpectralField apply_to(const SpectralField& v, int out_cutoff) const {
        if (is_diagonal()) {
            SpectralField out = v;
            out *= diagonal_factor();
            return out;
        }
        const auto& h = multiplier_symbol();
        SpectralField out(out_cutoff);
        for (int q = -out_cutoff; q <= out_cutoff; ++q) {
            std::complex<double> acc(0.0, 0.0);
            for (int p = -v.cutoff(); p <= v.cutoff(); ++p) acc += h.at_or_zero(q - p) * v.at(p);
            out.at(q) = acc;
        }
        return out;
    }

private:
    explicit CouplingOperator(std::variant<DiagonalCoupling, MultiplierCoupling> op) : op_(std::move(op)) {}
    std::variant<DiagonalCoupling, MultiplierCoupling> op_;
};

// Pointwise product h * v in spectral form, truncated back to v's cutoff.
inline SpectralField apply_coupling(const CouplingOperator& op, const SpectralField& v) {
    return op.apply_to(v, v.cutoff());
}

}  // namespace chaospde
