#ifndef NCVX_ERRORS_HPP
#define NCVX_ERRORS_HPP

#include <stdexcept>
#include <string>
#include <vector>

namespace ncvx {

/// Operand shapes do not satisfy an op's shape rule.
class ShapeError : public std::invalid_argument
{
public:
    using std::invalid_argument::invalid_argument;
};

/// Input outside an op's mathematical domain (sqrt/log of a non-positive value).
class DomainError : public std::domain_error
{
public:
    using std::domain_error::domain_error;
};

/// Caller violated a documented precondition.
class ContractError : public std::logic_error
{
public:
    using std::logic_error::logic_error;
};

/// A problem callback produced a non-finite value. Carries the offending point.
class NumericalError : public std::runtime_error
{
public:
    NumericalError(const std::string& what, std::vector<double> iterate)
        : std::runtime_error(what), iterate_(std::move(iterate))
    {}

    const std::vector<double>& iterate() const noexcept { return iterate_; }

private:
    std::vector<double> iterate_;
};

} // namespace ncvx

#endif // NCVX_ERRORS_HPP
