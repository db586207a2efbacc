#include "ppann/attacks.hpp"

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <stdexcept>

namespace ppann::attacks {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

VectorXd to_eigen(const Vec64& v) {
    return Eigen::Map<const VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Vec64 from_eigen(const VectorXd& v) { return Vec64(v.data(), v.data() + v.size()); }

double rel_error(const Vec64& got, const Vec64& want) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < want.size(); ++i) {
        double diff = got[i] - want[i];
        num += diff * diff;
        den += want[i] * want[i];
    }
    return std::sqrt(num) / std::max(std::sqrt(den), 1e-30);
}

// Pre-transformation that reduces every linear-family variant to the plain
// linear system (exp and log are inverses of each other).
double pretransform(LeakVariant variant, double leak_value) {
    switch (variant) {
        case LeakVariant::Linear:
            return leak_value;
        case LeakVariant::Exponential:
            if (!(leak_value > 0)) throw std::domain_error("exponential leak must be positive");
            return std::log(leak_value);
        case LeakVariant::Logarithmic:
            return std::exp(leak_value);
        case LeakVariant::Square:
            return leak_value;
    }
    throw std::logic_error("unreachable");
}

struct LinearSolve {
    VectorXd x;
    double condition;
};

LinearSolve solve_full_rank(const MatrixXd& a, const VectorXd& b, const char* what) {
    Eigen::PartialPivLU<MatrixXd> lu(a);
    MatrixXd inv = lu.inverse();
    if (!inv.allFinite()) throw std::runtime_error(std::string(what) + ": singular coefficient matrix");
    double cond = a.cwiseAbs().colwise().sum().maxCoeff() * inv.cwiseAbs().colwise().sum().maxCoeff();
    VectorXd x = lu.solve(b);
    double resid = (a * x - b).cwiseAbs().maxCoeff();
    double scale = b.cwiseAbs().maxCoeff() + 1.0;
    if (!(resid <= 1e-6 * scale)) {
        throw std::runtime_error(std::string(what) + ": solve residual too large (singular system?)");
    }
    return {std::move(x), cond};
}

// The squared-leak basis carries one exact linear dependency (the ||p||^2
// entry equals a quarter of the sum of the 4*p_i^2 entries), so its systems
// are rank-deficient by one; a rank-revealing solve still pins every entry
// the extraction below reads.
struct RankDeficientSolver {
    Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod;
    double condition = 0;
    const MatrixXd* a = nullptr;

    explicit RankDeficientSolver(const MatrixXd& mat) : cod(mat), a(&mat) {
        Eigen::Index rank = cod.rank();
        if (rank + 1 < mat.cols()) {
            throw std::runtime_error("square-leak solve: coefficient matrix rank too low");
        }
        VectorXd diag = cod.matrixT().diagonal().head(rank).cwiseAbs();
        condition = diag.maxCoeff() / diag.minCoeff();
    }

    VectorXd solve(const VectorXd& b, const char* what) const {
        VectorXd x = cod.solve(b);
        double resid = ((*a) * x - b).cwiseAbs().maxCoeff();
        double scale = b.cwiseAbs().maxCoeff() + 1.0;
        if (!(resid <= 1e-6 * scale)) {
            throw std::runtime_error(std::string(what) + ": solve residual too large");
        }
        return x;
    }
};

}  // namespace

LeakVariant variant_from_string(const std::string& name) {
    if (name == "linear") return LeakVariant::Linear;
    if (name == "exp") return LeakVariant::Exponential;
    if (name == "log") return LeakVariant::Logarithmic;
    if (name == "square") return LeakVariant::Square;
    throw std::invalid_argument("unknown leak variant: " + name);
}

std::string to_string(LeakVariant v) {
    switch (v) {
        case LeakVariant::Linear: return "linear";
        case LeakVariant::Exponential: return "exp";
        case LeakVariant::Logarithmic: return "log";
        case LeakVariant::Square: return "square";
    }
    return "?";
}

AspeKey aspe_keygen(std::uint32_t d, std::uint64_t seed) {
    SeededRng rng(seed);
    auto pair = gen_invertible_matrix(d + 2, rng);
    return {std::move(pair.m), std::move(pair.inv), d};
}

Vec64 aspe_encrypt(const Vec64& p, const AspeKey& key) {
    if (p.size() != key.d) throw std::invalid_argument("aspe_encrypt: dimension mismatch");
    return row_times_mat(augment_plaintext(p), key.m);
}

Vec64 aspe_trapgen(const Vec64& q, const AspeKey& key) {
    if (q.size() != key.d) throw std::invalid_argument("aspe_trapgen: dimension mismatch");
    Vec64 augmented(key.d + 2);
    std::copy(q.begin(), q.end(), augmented.begin());
    augmented[key.d] = 1.0;
    augmented[key.d + 1] = 0.0;
    return mat_times_col(key.m_inv, augmented);
}

double leak(LeakVariant variant, const Vec64& p, const Vec64& q, const LeakScalars& scalars) {
    switch (variant) {
        case LeakVariant::Linear:
            return scalars.a * sq_dist(p, q) + scalars.b;
        case LeakVariant::Exponential:
            return std::exp(scalars.a * sq_dist(p, q) + scalars.b);
        case LeakVariant::Logarithmic: {
            double inner = scalars.a * sq_dist(p, q) + scalars.b;
            if (!(inner > 0)) throw std::domain_error("logarithmic leak: a*dist + b must be positive");
            return std::log(inner);
        }
        case LeakVariant::Square: {
            double dist_prime = sq_norm(p) - 2.0 * dot(p, q);
            double base = dist_prime + scalars.r2;
            return scalars.r1 * base * base + scalars.r3;
        }
    }
    throw std::logic_error("unreachable");
}

Vec64 augment_plaintext(const Vec64& p) {
    Vec64 row(p.size() + 2);
    for (std::size_t i = 0; i < p.size(); ++i) row[i] = -2.0 * p[i];
    row[p.size()] = sq_norm(p);
    row[p.size() + 1] = 1.0;
    return row;
}

Vec64 expand_square_basis(const Vec64& p) {
    const std::size_t d = p.size();
    Vec64 out;
    out.reserve(square_basis_dim(d));
    const double norm_sq = sq_norm(p);
    out.push_back(norm_sq * norm_sq);
    for (double x : p) out.push_back(norm_sq * x);
    out.push_back(norm_sq);
    for (double x : p) out.push_back(4.0 * x * x);
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = i + 1; j < d; ++j) out.push_back(8.0 * p[i] * p[j]);
    }
    for (double x : p) out.push_back(-4.0 * x);
    out.push_back(1.0);
    return out;
}

Vec64 expand_square_query(const Vec64& q, const LeakScalars& scalars) {
    const std::size_t d = q.size();
    const double r1 = scalars.r1;
    const double r2 = scalars.r2;
    Vec64 out;
    out.reserve(square_basis_dim(d));
    out.push_back(r1);
    for (double x : q) out.push_back(-4.0 * r1 * x);
    out.push_back(2.0 * r1 * r2);
    for (double x : q) out.push_back(r1 * x * x);
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = i + 1; j < d; ++j) out.push_back(r1 * q[i] * q[j]);
    }
    for (double x : q) out.push_back(r1 * r2 * x);
    out.push_back(r1 * r2 * r2 + scalars.r3);
    return out;
}

std::size_t required_leaks(LeakVariant variant, std::size_t d) {
    return variant == LeakVariant::Square ? square_basis_dim(d) : d + 2;
}

namespace {

std::vector<RecoveredQuery> recover_queries_impl(LeakVariant variant,
                                                 const std::vector<Vec64>& leaked_db,
                                                 const std::vector<std::vector<double>>& leaks_per_query) {
    if (leaked_db.empty()) throw std::invalid_argument("recover_query: no leaked plaintexts");
    const std::size_t d = leaked_db[0].size();
    const std::size_t n = required_leaks(variant, d);
    if (leaked_db.size() < n) {
        throw std::invalid_argument("recover_query: need " + std::to_string(n) + " leaked plaintexts");
    }

    const bool square = variant == LeakVariant::Square;
    MatrixXd a(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        Vec64 row = square ? expand_square_basis(leaked_db[i]) : augment_plaintext(leaked_db[i]);
        a.row(static_cast<Eigen::Index>(i)) = to_eigen(row).transpose();
    }

    std::vector<RecoveredQuery> out;
    out.reserve(leaks_per_query.size());

    auto extract = [&](const VectorXd& x, double condition) {
        RecoveredQuery rq;
        rq.solution = from_eigen(x);
        rq.condition = condition;
        rq.q.resize(d);
        if (square) {
            double r1 = x(0);
            for (std::size_t i = 0; i < d; ++i) rq.q[i] = -x(1 + static_cast<Eigen::Index>(i)) / (4.0 * r1);
        } else {
            double scale = x(static_cast<Eigen::Index>(d));
            for (std::size_t i = 0; i < d; ++i) rq.q[i] = x(static_cast<Eigen::Index>(i)) / scale;
        }
        return rq;
    };

    auto make_rhs = [&](const std::vector<double>& leaks) {
        if (leaks.size() < n) throw std::invalid_argument("recover_query: need one leak per plaintext");
        VectorXd b(n);
        for (std::size_t i = 0; i < n; ++i) b(static_cast<Eigen::Index>(i)) = pretransform(variant, leaks[i]);
        return b;
    };

    if (square) {
        RankDeficientSolver solver(a);
        for (const auto& leaks : leaks_per_query) {
            out.push_back(extract(solver.solve(make_rhs(leaks), "recover_query"), solver.condition));
        }
    } else {
        Eigen::PartialPivLU<MatrixXd> lu(a);
        MatrixXd inv = lu.inverse();
        if (!inv.allFinite()) throw std::runtime_error("recover_query: singular coefficient matrix");
        double cond = a.cwiseAbs().colwise().sum().maxCoeff() *
                      inv.cwiseAbs().colwise().sum().maxCoeff();
        for (const auto& leaks : leaks_per_query) {
            VectorXd b = make_rhs(leaks);
            VectorXd x = lu.solve(b);
            double resid = (a * x - b).cwiseAbs().maxCoeff();
            if (!(resid <= 1e-6 * (b.cwiseAbs().maxCoeff() + 1.0))) {
                throw std::runtime_error("recover_query: solve residual too large (singular system?)");
            }
            out.push_back(extract(x, cond));
        }
    }
    return out;
}

}  // namespace

RecoveredQuery recover_query(LeakVariant variant, const std::vector<Vec64>& leaked_db,
                             const std::vector<double>& leaks) {
    return recover_queries_impl(variant, leaked_db, {leaks})[0];
}

SquareScalars recover_square_scalars(const RecoveredQuery& rq, const Vec64& leaked_plaintext,
                                     double leak_value) {
    const std::size_t d = rq.q.size();
    const Vec64& x = rq.solution;
    SquareScalars s;
    s.r1 = x[0];
    // the solver's null direction shifts the ||p||^2 slot by +t and each
    // 4*p_i^2 slot by -t/4; the recovered q pins t
    double t_acc = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        t_acc += 4.0 * (s.r1 * rq.q[i] * rq.q[i] - x[d + 2 + i]);
    }
    double t = t_acc / static_cast<double>(d);
    s.r2 = (x[d + 1] - t) / (2.0 * s.r1);
    double dist_prime = sq_norm(leaked_plaintext) - 2.0 * dot(leaked_plaintext, rq.q);
    double base = dist_prime + s.r2;
    s.r3 = leak_value - s.r1 * base * base;
    return s;
}

RecoveredDatabaseVector recover_database_vector(LeakVariant variant,
                                                const std::vector<RecoveredQuery>& queries,
                                                const std::vector<double>& leaks) {
    if (queries.empty()) throw std::invalid_argument("recover_database_vector: no recovered queries");
    const std::size_t d = queries[0].q.size();
    const std::size_t n = required_leaks(variant, d);
    if (queries.size() < n || leaks.size() < n) {
        throw std::invalid_argument("recover_database_vector: need " + std::to_string(n) +
                                    " recovered queries with leaks");
    }

    RecoveredDatabaseVector out;
    if (variant != LeakVariant::Square) {
        MatrixXd a(n, n);
        VectorXd b(n);
        for (std::size_t j = 0; j < n; ++j) {
            a.row(static_cast<Eigen::Index>(j)) = to_eigen(queries[j].solution).transpose();
            b(static_cast<Eigen::Index>(j)) = pretransform(variant, leaks[j]);
        }
        auto solved = solve_full_rank(a, b, "recover_database_vector");
        // y = [-2p, ||p||^2, 1]
        double last = solved.x(static_cast<Eigen::Index>(d + 1));
        out.p.resize(d);
        for (std::size_t i = 0; i < d; ++i) {
            out.p[i] = -solved.x(static_cast<Eigen::Index>(i)) / (2.0 * last);
        }
        out.condition = solved.condition;
        return out;
    }

    throw std::invalid_argument(
        "recover_database_vector: the square variant needs recovered scalars; use the overload "
        "taking SquareScalars");
}

RecoveredDatabaseVector recover_database_vector(const std::vector<RecoveredQuery>& queries,
                                                const std::vector<double>& leaks,
                                                const SquareScalars& scalars) {
    if (queries.empty()) throw std::invalid_argument("recover_database_vector: no recovered queries");
    const std::size_t d = queries[0].q.size();
    const std::size_t n = required_leaks(LeakVariant::Square, d);
    LeakScalars ls;
    ls.r1 = scalars.r1;
    ls.r2 = scalars.r2;
    ls.r3 = scalars.r3;

    MatrixXd a(n, n);
    VectorXd b(n);
    for (std::size_t j = 0; j < n; ++j) {
        a.row(static_cast<Eigen::Index>(j)) = to_eigen(expand_square_query(queries[j].q, ls)).transpose();
        b(static_cast<Eigen::Index>(j)) = leaks[j];
    }

    // rows span strictly fewer dimensions than the basis; solve rank-deficiently
    Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(a);
    VectorXd y = cod.solve(b);
    double resid = (a * y - b).cwiseAbs().maxCoeff();
    if (!(resid <= 1e-6 * (b.cwiseAbs().maxCoeff() + 1.0))) {
        throw std::runtime_error("recover_database_vector: square solve residual too large");
    }

    // the p_i^2 and p_i*p_j slots are pinned; the linear slots are only pinned
    // jointly, so eliminate the shared null component per coordinate
    double norm_sq = 0.0;
    for (std::size_t i = 0; i < d; ++i) norm_sq += y(static_cast<Eigen::Index>(d + 2 + i)) / 4.0;

    const double denom = -4.0 * (scalars.r2 + norm_sq);
    if (std::abs(denom) < 1e-12) {
        throw std::runtime_error("recover_database_vector: degenerate scalars (r2 + ||p||^2 ~ 0)");
    }
    const std::size_t lin_off = square_basis_dim(d) - 1 - d;  // -4*p block
    RecoveredDatabaseVector out;
    out.p.resize(d);
    for (std::size_t i = 0; i < d; ++i) {
        double y1 = y(static_cast<Eigen::Index>(1 + i));        // ||p||^2 * p_i slot
        double y5 = y(static_cast<Eigen::Index>(lin_off + i));  // -4 * p_i slot
        out.p[i] = (scalars.r2 * y5 - 4.0 * y1) / denom;
    }
    Eigen::Index rank = cod.rank();
    VectorXd diag = cod.matrixT().diagonal().head(rank).cwiseAbs();
    out.condition = diag.maxCoeff() / diag.minCoeff();
    return out;
}

AttackReport run_attack_demo(LeakVariant variant, std::uint32_t d, std::uint64_t seed) {
    auto t0 = std::chrono::steady_clock::now();
    SeededRng rng(seed);

    LeakScalars scalars;
    switch (variant) {
        case LeakVariant::Linear:
        case LeakVariant::Exponential:
            scalars.a = rng.uniform(0.5, 2.0);
            scalars.b = rng.uniform(-1.0, 1.0);
            break;
        case LeakVariant::Logarithmic:
            scalars.a = rng.uniform(0.5, 2.0);
            scalars.b = rng.uniform(0.5, 2.0);  // keeps a*dist + b positive
            break;
        case LeakVariant::Square:
            scalars.r1 = rng.uniform(0.5, 2.0);
            scalars.r2 = rng.uniform(-1.0, 1.0);
            scalars.r3 = rng.uniform(-1.0, 1.0);
            break;
    }
    if (variant == LeakVariant::Exponential && d > 50) {
        scalars.a *= 50.0 / d;  // keep exp(a * dist) inside double range
    }

    const std::size_t n = required_leaks(variant, d);
    auto draw_vec = [&] {
        Vec64 v(d);
        for (auto& x : v) x = rng.gaussian();
        return v;
    };

    AttackReport report{variant, d, seed, 0, 0, 0, n};

    for (int attempt = 0; attempt < 10; ++attempt) {
        try {
            std::vector<Vec64> leaked(n);
            for (auto& v : leaked) v = draw_vec();
            std::vector<Vec64> queries(n);
            for (auto& v : queries) v = draw_vec();
            Vec64 target = draw_vec();

            std::vector<std::vector<double>> query_leaks(n, std::vector<double>(n));
            for (std::size_t j = 0; j < n; ++j) {
                for (std::size_t i = 0; i < n; ++i) {
                    query_leaks[j][i] = leak(variant, leaked[i], queries[j], scalars);
                }
            }
            auto recovered = recover_queries_impl(variant, leaked, query_leaks);

            report.max_query_error = 0;
            for (std::size_t j = 0; j < n; ++j) {
                report.max_query_error =
                    std::max(report.max_query_error, rel_error(recovered[j].q, queries[j]));
            }

            std::vector<double> target_leaks(n);
            for (std::size_t j = 0; j < n; ++j) target_leaks[j] = leak(variant, target, queries[j], scalars);

            RecoveredDatabaseVector rec_p;
            if (variant == LeakVariant::Square) {
                SquareScalars sq = recover_square_scalars(recovered[0], leaked[0], query_leaks[0][0]);
                rec_p = recover_database_vector(recovered, target_leaks, sq);
            } else {
                rec_p = recover_database_vector(variant, recovered, target_leaks);
            }
            report.db_vector_error = rel_error(rec_p.p, target);
            break;
        } catch (const std::runtime_error&) {
            if (attempt == 9) throw;
        }
    }

    report.elapsed_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

}  // namespace ppann::attacks
