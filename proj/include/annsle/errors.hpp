#pragma once

#include <stdexcept>
#include <string>

namespace annsle {

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
    virtual int exit_code() const { return 2; }
};

#define ANNSLE_ERROR(Name)                                              \
    class Name : public Error {                                         \
    public:                                                             \
        explicit Name(const std::string& what) : Error(#Name ": " + what) {} \
    };

ANNSLE_ERROR(PoleProximity)
ANNSLE_ERROR(NonConvergent)
ANNSLE_ERROR(QuadratureFailure)
ANNSLE_ERROR(StepUnderflow)
ANNSLE_ERROR(ModulusExhausted)
ANNSLE_ERROR(Swallowed)
ANNSLE_ERROR(ReverseBlowup)
ANNSLE_ERROR(InvalidFamilyParams)
ANNSLE_ERROR(NormalizerInconsistent)
ANNSLE_ERROR(DriftPole)
ANNSLE_ERROR(DomainViolation)
ANNSLE_ERROR(TipEvaluationUnstable)
ANNSLE_ERROR(JetUnstable)
ANNSLE_ERROR(GridIncomplete)
ANNSLE_ERROR(ExcessiveRejection)
ANNSLE_ERROR(InvalidArgument)

#undef ANNSLE_ERROR

}  // namespace annsle
