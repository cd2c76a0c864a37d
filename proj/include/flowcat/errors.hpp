#pragma once

#include <stdexcept>
#include <string>

namespace flowcat {

struct flowcat_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

#define FLOWCAT_ERROR(Name)                                        \
    struct Name : flowcat_error {                                  \
        explicit Name(const std::string& what)                     \
            : flowcat_error(std::string(#Name) + ": " + what) {}   \
    }

FLOWCAT_ERROR(ShapeMismatch);
FLOWCAT_ERROR(SingularMatrix);
FLOWCAT_ERROR(SubNotContained);
FLOWCAT_ERROR(NotAComplex);
FLOWCAT_ERROR(NotAChainMap);
FLOWCAT_ERROR(MissingDimension);
FLOWCAT_ERROR(EmptyTower);
FLOWCAT_ERROR(BadSequence);
FLOWCAT_ERROR(InvalidModel);
FLOWCAT_ERROR(OracleMissingPairing);
FLOWCAT_ERROR(ParityViolation);
FLOWCAT_ERROR(NotComposable);
FLOWCAT_ERROR(NotUnitriangular);
FLOWCAT_ERROR(NotASubset);
FLOWCAT_ERROR(MissingOracleFactor);
FLOWCAT_ERROR(UnsupportedFiberDim);
FLOWCAT_ERROR(NotConverged);
FLOWCAT_ERROR(WitnessMissing);
FLOWCAT_ERROR(DegenerateCritical);
FLOWCAT_ERROR(NonTransverse);
FLOWCAT_ERROR(ParseError);

#undef FLOWCAT_ERROR

} // namespace flowcat
