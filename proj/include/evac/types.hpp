/*
   Copyright 2026 The evacsim Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace evac {

using StateId = std::uint32_t;
using ControlId = std::uint32_t;
using ActionId = std::uint32_t;
using OutcomeId = std::uint32_t;

/// Action 0 of every control is the null action: it never moves packets.
inline constexpr ActionId kNullAction = 0;

// Error hierarchy. Everything thrown by the library derives from Error.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct PreconditionError : Error {
    using Error::Error;
};
struct RangeError : Error {
    using Error::Error;
};
struct ConvergenceError : Error {
    using Error::Error;
};
struct RegistryError : Error {
    using Error::Error;
};
struct UnsupportedError : Error {
    using Error::Error;
};
struct ContractError : Error {
    using Error::Error;
};
struct ConfigError : Error {
    using Error::Error;
};

/// Packets per class. All entries are nonnegative.
class CountVector {
public:
    CountVector() = default;
    explicit CountVector(std::size_t n) : k_(n, 0) {}
    CountVector(std::initializer_list<int> v) : k_(v) { check(); }
    explicit CountVector(std::vector<int> v) : k_(std::move(v)) { check(); }

    static CountVector unit(std::size_t n, std::size_t i) {
        CountVector e(n);
        e.k_.at(i) = 1;
        return e;
    }

    std::size_t size() const noexcept { return k_.size(); }
    int operator[](std::size_t i) const { return k_[i]; }
    int& operator[](std::size_t i) { return k_[i]; }
    const std::vector<int>& values() const noexcept { return k_; }

    long total() const noexcept { return std::accumulate(k_.begin(), k_.end(), 0L); }
    bool is_zero() const noexcept {
        return std::all_of(k_.begin(), k_.end(), [](int x) { return x == 0; });
    }
    int max_entry() const noexcept { return k_.empty() ? 0 : *std::max_element(k_.begin(), k_.end()); }

    /// Componentwise k <= other.
    bool fits_in(const CountVector& other) const {
        if (other.size() != size()) return false;
        for (std::size_t i = 0; i < size(); ++i)
            if (k_[i] > other.k_[i]) return false;
        return true;
    }

    CountVector& operator+=(const CountVector& o) {
        for (std::size_t i = 0; i < size(); ++i) k_[i] += o.k_[i];
        return *this;
    }
    friend CountVector operator+(CountVector a, const CountVector& b) { return a += b; }
    /// Componentwise minimum.
    friend CountVector min(const CountVector& a, const CountVector& b) {
        CountVector r(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) r.k_[i] = std::min(a.k_[i], b.k_[i]);
        return r;
    }
    friend long l1_distance(const CountVector& a, const CountVector& b) {
        long d = 0;
        for (std::size_t i = 0; i < a.size(); ++i) d += std::abs(a.k_[i] - b.k_[i]);
        return d;
    }

    friend bool operator==(const CountVector&, const CountVector&) = default;
    friend auto operator<=>(const CountVector&, const CountVector&) = default;

    std::string to_string() const {
        std::ostringstream os;
        os << '(';
        for (std::size_t i = 0; i < size(); ++i) os << (i ? "," : "") << k_[i];
        os << ')';
        return os.str();
    }

private:
    void check() const {
        for (int x : k_)
            if (x < 0) throw PreconditionError("CountVector entries must be nonnegative");
    }
    std::vector<int> k_;
};

/// Packets per slot per class. Entries are nonnegative and finite.
class RateVector {
public:
    RateVector() = default;
    explicit RateVector(std::size_t n) : r_(n, 0.0) {}
    RateVector(std::initializer_list<double> v) : r_(v) { check(); }
    explicit RateVector(std::vector<double> v) : r_(std::move(v)) { check(); }

    std::size_t size() const noexcept { return r_.size(); }
    double operator[](std::size_t i) const { return r_[i]; }
    const std::vector<double>& values() const noexcept { return r_; }
    double sum() const noexcept { return std::accumulate(r_.begin(), r_.end(), 0.0); }
    bool is_zero() const noexcept {
        return std::all_of(r_.begin(), r_.end(), [](double x) { return x == 0.0; });
    }

    friend RateVector operator*(double rho, const RateVector& r) {
        std::vector<double> v(r.r_);
        for (double& x : v) x *= rho;
        return RateVector(std::move(v));
    }
    friend RateVector operator+(const RateVector& a, const RateVector& b) {
        std::vector<double> v(a.r_);
        for (std::size_t i = 0; i < v.size(); ++i) v[i] += b.r_[i];
        return RateVector(std::move(v));
    }
    friend double l1_distance(const RateVector& a, const RateVector& b) {
        double d = 0;
        for (std::size_t i = 0; i < a.size(); ++i) d += std::abs(a.r_[i] - b.r_[i]);
        return d;
    }
    friend bool operator==(const RateVector&, const RateVector&) = default;

    std::string to_string() const {
        std::ostringstream os;
        os << '(';
        for (std::size_t i = 0; i < size(); ++i) os << (i ? "," : "") << r_[i];
        os << ')';
        return os.str();
    }

private:
    void check() const {
        for (double x : r_)
            if (!(x >= 0.0) || !std::isfinite(x))
                throw PreconditionError("RateVector entries must be nonnegative and finite");
    }
    std::vector<double> r_;
};

/// Ceiling of t*r per coordinate. Products within 1e-9 of an integer snap to it,
/// so 60 * 0.2 maps to 12 rather than 13.
inline CountVector scaled_ceil(const RateVector& r, double t) {
    std::vector<int> k(r.size());
    for (std::size_t i = 0; i < r.size(); ++i) {
        const double x = t * r[i];
        const double nearest = std::round(x);
        k[i] = static_cast<int>(std::abs(x - nearest) <= 1e-9 ? nearest : std::ceil(x));
    }
    return CountVector(std::move(k));
}

/// Dense row-major indexing of the box [0, kmax].
class Box {
public:
    Box() = default;
    explicit Box(CountVector kmax) : kmax_(std::move(kmax)), strides_(kmax_.size()) {
        std::size_t s = 1;
        for (std::size_t i = kmax_.size(); i-- > 0;) {
            strides_[i] = s;
            s *= static_cast<std::size_t>(kmax_[i]) + 1;
        }
        cells_ = s;
    }

    const CountVector& kmax() const noexcept { return kmax_; }
    std::size_t dims() const noexcept { return kmax_.size(); }
    std::size_t cells() const noexcept { return cells_; }
    std::size_t stride(std::size_t i) const { return strides_[i]; }

    bool contains(const CountVector& k) const { return k.fits_in(kmax_); }

    std::size_t index(const CountVector& k) const {
        std::size_t idx = 0;
        for (std::size_t i = 0; i < k.size(); ++i) idx += static_cast<std::size_t>(k[i]) * strides_[i];
        return idx;
    }

    CountVector at(std::size_t idx) const {
        CountVector k(dims());
        for (std::size_t i = 0; i < dims(); ++i) {
            k[i] = static_cast<int>(idx / strides_[i]);
            idx %= strides_[i];
        }
        return k;
    }

private:
    CountVector kmax_;
    std::vector<std::size_t> strides_;
    std::size_t cells_ = 0;
};

}  // namespace evac
