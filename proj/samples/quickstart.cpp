// Smallest useful program: 200 steps on a 30x30 torus, energy printed every 20.
#include <cstdio>

#include "lch/diagnostics.hpp"
#include "lch/initial.hpp"
#include "lch/stepper.hpp"

int main() {
  lch::ModelParams p;
  p.M = 30;
  const lch::PeriodicMesh mesh(p.M, p.L);
  const lch::SimState init = lch::initial_state(mesh, lch::InitialSpec{}, 7, p);

  lch::Stepper stepper(mesh, p);
  stepper.run(init, 200, [&](const lch::SimState&, const lch::SimState& next,
                             const lch::StepStats& st) {
    if (next.step % 20 != 0) return;
    const auto e = lch::discrete_energy(mesh, next, p);
    const auto m = lch::masses(mesh, next, p);
    std::printf("step %4ld  E = %.10f  (c,1)_h = %.15f  newton %d\n", next.step, e.total,
                m.c_mass, st.iterations);
  });
}
