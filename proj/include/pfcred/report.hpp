#pragma once

#include <ostream>
#include <string>

#include <json.hpp>

#include "pfcred/simlab.hpp"

namespace pfcred {

using Json = nlohmann::ordered_json;

inline constexpr const char* kSchema = "pfcred/1";

/// Matrices are written as arrays of rows, except subspace bases
/// (`reduction`, `projection`, `gamma`), which are arrays of basis vectors.
Json matrix_rows(const Matrix& m);
Json matrix_columns(const Matrix& m);
Json vector_json(const Vector& v);

Json to_json(const PfcFit& fit);
Json to_json(const TestReport& report);
Json to_json(const DimSelection& selection);
Json to_json(const PredictorTest& test);
Json to_json(const EliminationResult& result);
Json to_json(const StructuredFit& fit);
Json to_json(const StructureTest& test);
Json to_json(const AngleStudy& study);
Json to_json(const DimStudy& study);
Json to_json(const LevelStudy& study);

/// Adds the top-level schema tag and the document kind.
Json envelope(const std::string& kind, Json body);

/// One row per replication; numbers with 17 significant digits.
void write_csv(const AngleStudy& study, std::ostream& out);
void write_csv(const DimStudy& study, std::ostream& out);
void write_csv(const LevelStudy& study, std::ostream& out);

std::string format_number(double v);

}  // namespace pfcred
