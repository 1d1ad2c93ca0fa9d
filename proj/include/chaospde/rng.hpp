#pragma once

#include <cmath>
#include <cstdint>

namespace chaospde {
namespace rng {

// SplitMix64 finalizer. Statistically strong mixing of a 64-bit counter.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

inline std::uint64_t combine(std::uint64_t a, std::uint64_t b) {
    return mix64(a ^ (0x9E3779B97F4A7C15ULL + (b << 6) + (b >> 2)));
}

// Uniform in (0, 1), 53-bit mantissa, never exactly 0 or 1.
inline double uniform_from_bits(std::uint64_t bits) {
    double u = static_cast<double>((bits >> 11) + 1ULL) * 0x1.0p-53;
    if (u >= 1.0) u = 1.0 - 0x1.0p-53;
    return u;
}

// Wichura's PPND16 rational approximation of the standard normal quantile,
// relative accuracy ~1e-15 over (0,1).
inline double inverse_normal_cdf(double p) {
    const double a[8] = {3.3871328727963666080e0, 1.3314166789178437745e2, 1.9715909503065514427e3,
                         1.3731693765509461125e4, 4.5921953931549871457e4, 6.7265770927008700853e4,
                         3.3430575583588128105e4, 2.5090809287301226727e3};
    const double b[8] = {1.0, 4.2313330701600911252e1, 6.8718700749205790830e2, 5.3941960214247511077e3,
                         2.1213794301586595867e4, 3.9307895800092710610e4, 2.8729085735721942674e4,
                         5.2264952788528545610e3};
    const double c[8] = {1.42343711074968357734e0, 4.63033784615654529590e0, 5.76949722146069140550e0,
                         3.64784832476320460504e0, 1.27045825245236838258e0, 2.41780725177450611770e-1,
                         2.27238449892691845833e-2, 7.74545014278341407640e-4};
    const double d[8] = {1.0, 2.05319162663775882187e0, 1.67638483018380384940e0, 6.89767334985100004550e-1,
                         1.48103976427480074590e-1, 1.51986665636164571966e-2, 5.47593808499534494600e-4,
                         1.05075007164441684324e-9};
    const double e[8] = {6.65790464350110377720e0, 5.46378491116411436990e0, 1.78482653991729133580e0,
                         2.96560571828504891230e-1, 2.65321895265761230930e-2, 1.24266094738807843860e-3,
                         2.71155556874348757815e-5, 2.01033439929228813265e-7};
    const double f[8] = {1.0, 5.99832206555887937690e-1, 1.36929880922735805310e-1, 1.48753612908506148525e-2,
                         7.86869131145613259100e-4, 1.84631831751005468180e-5, 1.42151175831644588870e-7,
                         2.04426310338993978564e-15};
    auto poly = [](const double* cf, double x) {
        return cf[0] + x * (cf[1] + x * (cf[2] + x * (cf[3] + x * (cf[4] + x * (cf[5] + x * (cf[6] + x * cf[7]))))));
    };
    double q = p - 0.5;
    if (std::fabs(q) <= 0.425) {
        double r = 0.180625 - q * q;
        return q * poly(a, r) / poly(b, r);
    }
    double r = q < 0.0 ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double val;
    if (r <= 5.0) {
        r -= 1.6;
        val = poly(c, r) / poly(d, r);
    } else {
        r -= 5.0;
        val = poly(e, r) / poly(f, r);
    }
    return q < 0.0 ? -val : val;
}

// Standard normal draw keyed purely by (seed, k, l, sample_id, stream).
// Evaluation order never matters; identical keys give identical values on
// every platform and thread count.
inline double counter_normal(std::uint64_t seed, std::uint64_t k, std::uint64_t l, std::uint64_t sample_id,
                             std::uint64_t stream = 0) {
    std::uint64_t key = combine(seed, stream);
    key = combine(key, sample_id);
    key = combine(key, (k << 20) ^ l);
    return inverse_normal_cdf(uniform_from_bits(mix64(key)));
}

}  // namespace rng
}  // namespace chaospde
