#ifndef ACDC_ERRORS_HPP
#define ACDC_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace acdc {

/// Invalid parameters or configuration (bad profile, size guard exceeded, ...).
class config_error : public std::invalid_argument {
public:
    explicit config_error(const std::string &what) : std::invalid_argument(what) {}
};

/// The estimator was asked something the observation cannot answer.
class estimation_error : public std::domain_error {
public:
    explicit estimation_error(const std::string &what) : std::domain_error(what) {}
};

/// Broken bookkeeping inside the simulator (unknown job id and the like).
class internal_error : public std::logic_error {
public:
    explicit internal_error(const std::string &what) : std::logic_error(what) {}
};

} // namespace acdc

#endif // ACDC_ERRORS_HPP
