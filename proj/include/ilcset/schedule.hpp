#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "ilcset/errors.hpp"
#include "ilcset/expr.hpp"
#include "ilcset/matrix.hpp"

namespace ilcset {

using TextGrid = std::vector<std::vector<std::string>>;

/// A matrix-valued function of the time step, evaluated eagerly over
/// k = 0..N and immutable afterwards.
class MatrixSchedule {
public:
    MatrixSchedule() = default;

    /// Constant schedule holding `m` at every step.
    MatrixSchedule(const Mat& m, int horizon)
        : rows_(m.rows()), cols_(m.cols()), horizon_(horizon),
          exprs_(m.rows() * m.cols()),
          cache_(static_cast<std::size_t>(horizon) + 1, m) {
        for (std::size_t i = 0; i < exprs_.size(); ++i) exprs_[i] = EntryExpr::constant(m[i]);
    }

    static MatrixSchedule zeros(std::size_t rows, std::size_t cols, int horizon) {
        return MatrixSchedule(Mat(rows, cols), horizon);
    }

    /// Builds from a per-step generator; entry expressions are left as constants
    /// of the k=0 value, so this form is meant for tests and derived schedules.
    static MatrixSchedule generate(std::size_t rows, std::size_t cols, int horizon,
                                   const std::function<Mat(int)>& f) {
        MatrixSchedule s(Mat(rows, cols), horizon);
        for (int k = 0; k <= horizon; ++k) {
            Mat m = f(k);
            if (m.rows() != rows || m.cols() != cols) {
                throw DimensionMismatch("MatrixSchedule::generate: step " + std::to_string(k) +
                                        " has shape " + shape_str(m));
            }
            s.cache_[static_cast<std::size_t>(k)] = std::move(m);
        }
        return s;
    }

    static MatrixSchedule from_exprs(std::size_t rows, std::size_t cols, int horizon,
                                     std::vector<EntryExpr> exprs);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    int horizon() const noexcept { return horizon_; }
    const Mat& at(int k) const { return cache_.at(static_cast<std::size_t>(k)); }
    const Mat& operator[](int k) const { return cache_[static_cast<std::size_t>(k)]; }
    const EntryExpr& expr(std::size_t i, std::size_t j) const { return exprs_.at(i * cols_ + j); }

    bool is_zero() const {
        for (const auto& m : cache_)
            if (max_abs(m) != 0.0) return false;
        return true;
    }

    /// max over k of ‖S(k)‖∞
    double max_inf_norm() const {
        double best = 0.0;
        for (const auto& m : cache_) best = std::max(best, inf_norm(m));
        return best;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    int horizon_ = 0;
    std::vector<EntryExpr> exprs_;
    std::vector<Mat> cache_;
};

inline MatrixSchedule MatrixSchedule::from_exprs(std::size_t rows, std::size_t cols, int horizon,
                                                 std::vector<EntryExpr> exprs) {
    if (exprs.size() != rows * cols) throw DimensionMismatch("from_exprs: entry count");
    if (horizon < 1) throw DimensionMismatch("from_exprs: horizon must be >= 1");
    MatrixSchedule s;
    s.rows_ = rows;
    s.cols_ = cols;
    s.horizon_ = horizon;
    s.exprs_ = std::move(exprs);
    s.cache_.assign(static_cast<std::size_t>(horizon) + 1, Mat(rows, cols));
    std::string errors;
    for (int k = 0; k <= horizon; ++k) {
        Mat& m = s.cache_[static_cast<std::size_t>(k)];
        for (std::size_t i = 0; i < rows; ++i) {
            for (std::size_t j = 0; j < cols; ++j) {
                try {
                    m(i, j) = eval_expr(s.exprs_[i * cols + j], k);
                } catch (const EvalError& e) {
                    errors += "(" + std::to_string(i) + "," + std::to_string(j) + ",k=" +
                              std::to_string(k) + "): " + e.what() + "\n";
                }
            }
        }
    }
    if (!errors.empty()) throw EvalError("schedule evaluation failed:\n" + errors);
    return s;
}

/// Parses every cell of `grid` and caches the evaluated matrices for k = 0..N.
/// All malformed cells are reported together with their (row, col) location.
inline MatrixSchedule build_schedule(const TextGrid& grid, int horizon) {
    if (grid.empty() || grid.front().empty()) throw DimensionMismatch("build_schedule: empty grid");
    const std::size_t rows = grid.size();
    const std::size_t cols = grid.front().size();
    std::vector<EntryExpr> exprs;
    exprs.reserve(rows * cols);
    std::string errors;
    std::size_t first_offset = 0;
    for (std::size_t i = 0; i < rows; ++i) {
        if (grid[i].size() != cols) {
            throw DimensionMismatch("build_schedule: row " + std::to_string(i) + " has " +
                                    std::to_string(grid[i].size()) + " cells, expected " +
                                    std::to_string(cols));
        }
        for (std::size_t j = 0; j < cols; ++j) {
            try {
                exprs.push_back(parse_expr(grid[i][j]));
            } catch (const ParseError& e) {
                if (errors.empty()) first_offset = e.offset();
                errors += "(" + std::to_string(i) + "," + std::to_string(j) + "): " + e.what() + "\n";
                exprs.emplace_back();
            }
        }
    }
    if (!errors.empty()) throw ParseError("schedule parse failed:\n" + errors, first_offset);
    return MatrixSchedule::from_exprs(rows, cols, horizon, std::move(exprs));
}

}  // namespace ilcset
