// Gapless-plane electrostatics of rectangular electrodes.
//
// A patch at voltage U embedded in an otherwise grounded infinite plane
// (z = 0) produces Phi = U Omega / (2 pi) above the plane, where Omega is
// the solid angle the patch subtends at the observation point. For a
// rectangle the solid angle is a signed sum over its four corners of
// atan(xi eta / (z R)) with (xi, eta) the corner offsets and
// R = sqrt(xi^2 + eta^2 + z^2). Electrode gaps are ignored.
#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "ionwire/core.hpp"

namespace ionwire::geometry {

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;
};

struct RectPatch {
    double x_min = 0.0, x_max = 0.0;
    double y_min = 0.0, y_max = 0.0;
    double voltage = 1.0;

    void validate() const {
        require(x_min < x_max && y_min < y_max, "patch extent must satisfy min < max");
        require_finite(voltage, "patch voltage");
    }

    /// Square of side `side` centered on the origin.
    static RectPatch centered_square(double side, double voltage = 1.0) {
        return {-side / 2, side / 2, -side / 2, side / 2, voltage};
    }
};

struct FieldSample {
    Vec3 position;
    double potential = 0.0;
    Vec3 field;
};

namespace detail {

inline void check_above_plane(const Vec3& r) {
    require(std::isfinite(r.x) && std::isfinite(r.y) && std::isfinite(r.z),
            "observation point must be finite");
    require(r.z > 0.0, "observation point must lie above the electrode plane (z > 0)");
}

struct Corner {
    double xi, eta, sign;
};

inline std::array<Corner, 4> corners(const RectPatch& p, const Vec3& r) {
    return {{{p.x_max - r.x, p.y_max - r.y, +1.0},
             {p.x_min - r.x, p.y_max - r.y, -1.0},
             {p.x_max - r.x, p.y_min - r.y, -1.0},
             {p.x_min - r.x, p.y_min - r.y, +1.0}}};
}

}  // namespace detail

/// Solid angle (sr) subtended by the patch at r.
inline double solid_angle(const RectPatch& patch, const Vec3& r) {
    patch.validate();
    detail::check_above_plane(r);
    double omega = 0.0;
    for (const auto& c : detail::corners(patch, r)) {
        const double R = std::sqrt(c.xi * c.xi + c.eta * c.eta + r.z * r.z);
        omega += c.sign * std::atan(c.xi * c.eta / (r.z * R));
    }
    return omega;
}

inline double patch_potential(const RectPatch& patch, const Vec3& r) {
    return patch.voltage * solid_angle(patch, r) / two_pi;
}

/// Analytic E = -grad Phi.
inline Vec3 patch_field(const RectPatch& patch, const Vec3& r) {
    patch.validate();
    detail::check_above_plane(r);
    const double z = r.z;
    const double z2 = z * z;
    double dxi = 0.0, deta = 0.0, dz = 0.0;
    for (const auto& c : detail::corners(patch, r)) {
        const double xi2 = c.xi * c.xi;
        const double eta2 = c.eta * c.eta;
        const double R2 = xi2 + eta2 + z2;
        const double R = std::sqrt(R2);
        dxi += c.sign * c.eta * z / ((xi2 + z2) * R);
        deta += c.sign * c.xi * z / ((eta2 + z2) * R);
        dz -= c.sign * c.xi * c.eta * (R2 + z2) / ((xi2 + z2) * (eta2 + z2) * R);
    }
    const double k = patch.voltage / two_pi;
    // xi = x_corner - x, so d/dx = -d/dxi and E_x = +k dG/dxi.
    return {k * dxi, k * deta, -k * dz};
}

inline FieldSample sample(const RectPatch& patch, const Vec3& r) {
    return {r, patch_potential(patch, r), patch_field(patch, r)};
}

/// D_eff = U / |E_z| on the patch's central normal at the given height.
inline double effective_distance(const RectPatch& patch, double height) {
    require(std::isfinite(height) && height > 0.0, "height must be > 0");
    patch.validate();
    require(patch.voltage != 0.0, "effective distance needs a nonzero patch voltage");
    const Vec3 r{(patch.x_min + patch.x_max) / 2, (patch.y_min + patch.y_max) / 2, height};
    const double ez = std::abs(patch_field(patch, r).z);
    if (!(ez > 0.0) || !std::isfinite(ez)) throw Unphysical("patch produces no field at the ion");
    return std::abs(patch.voltage) / ez;
}

/// Convenience for the square paddle of a wire.
inline double paddle_effective_distance(const WireSpec& wire, double height) {
    return effective_distance(RectPatch::centered_square(wire.paddle_side), height);
}

struct DeffRow {
    double height;
    double effective_distance;
};

inline std::vector<DeffRow> effective_distance_table(const RectPatch& patch, double from,
                                                     double to, double step) {
    require(step > 0.0 && from > 0.0 && to >= from, "height range must be positive and ordered");
    std::vector<DeffRow> rows;
    const auto count = static_cast<std::size_t>(std::floor((to - from) / step + 1e-9)) + 1;
    rows.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const double h = from + static_cast<double>(i) * step;
        rows.push_back({h, effective_distance(patch, h)});
    }
    return rows;
}

}  // namespace ionwire::geometry
