// Built with GATE_DOUBLE=1.
#include "acceptance.hpp"
#include "gradient_check.inl"

static_assert(sizeof(gate::Real) == 8);

namespace acceptance {

GradientCheckReport gradient_check_f64(double h, double floor_fraction) { return run_gradient_check(h, floor_fraction); }

}  // namespace acceptance
