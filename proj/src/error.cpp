#include "chaoslab/error.hpp"

namespace chaoslab {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_input: return "invalid input";
    case ErrorKind::shape: return "shape error";
    case ErrorKind::resource: return "resource limit";
    case ErrorKind::configuration: return "configuration error";
    case ErrorKind::ellipticity_violation: return "ellipticity violation";
    case ErrorKind::not_spd: return "matrix not SPD";
    case ErrorKind::step_size: return "step size";
    case ErrorKind::positivity_loss: return "positivity loss";
    case ErrorKind::conditional_density: return "conditional density";
    case ErrorKind::absolute_continuity: return "absolute continuity";
    case ErrorKind::infeasible: return "infeasible";
    case ErrorKind::insufficient_signal: return "insufficient signal";
    case ErrorKind::io: return "i/o error";
  }
  return "error";
}

}  // namespace chaoslab
