#pragma once

#include <json.hpp>
#include <string>

#include "stochsym/abstraction.hpp"
#include "stochsym/bounds.hpp"
#include "stochsym/composition.hpp"
#include "stochsym/runtime.hpp"

namespace stochsym {

using Json = nlohmann::ordered_json;

/// Matrices are nested row arrays, a bare number for 1x1, or {"rows", "cols"} when empty.
Json to_json(const Matrix& m);
Json to_json(const Vector& v);
Json to_json(const Box& b);
Json to_json(const Grid& g);
Json to_json(const AffineSystem& sys);
Json to_json(const StorageCertificate& cert);
Json to_json(const SstfConstants& c);
Json to_json(const NetworkSsf& s);
Json to_json(const CompositionResult& c);
Json to_json(const ClosenessBound& b);
Json to_json(const SimSummary& s);
Json to_json(const ConvergenceReport& c);
/// {"rows", "cols", "entries": [[i, j, v], ...]}
Json sparse_to_json(const SparseMatrix& m);

Matrix matrix_from_json(const Json& j, const std::string& field);
/// Like matrix_from_json but a missing or null entry yields rows x cols zeros.
Matrix matrix_or_zeros(const Json& parent, const std::string& key, Index rows, Index cols);
Vector vector_from_json(const Json& j, const std::string& field);
Box box_from_json(const Json& j, const std::string& field);
Grid grid_from_json(const Json& j, const std::string& field);
/// Dense nested arrays or the sparse triplet form.
SparseMatrix sparse_from_json(const Json& j, const std::string& field);
AffineSystem system_from_json(const Json& j, const std::string& field);
/// Missing fields take the defaults of StorageCertificate; M_bar, K, P, Q are required.
StorageCertificate certificate_from_json(const Json& j, const AffineSystem& sys, double tau, const std::string& field);

const char* to_string(AbstractionKind k) noexcept;
const char* to_string(AlphaMode m) noexcept;
const char* to_string(GershgorinVerdict v) noexcept;

void write_text_file(const std::string& path, const std::string& text);
void write_json_file(const std::string& path, const Json& j);

}  // namespace stochsym
