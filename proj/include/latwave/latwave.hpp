#pragma once

#include "latwave/continuation.hpp"
#include "latwave/exit_lab.hpp"
#include "latwave/floquet.hpp"
#include "latwave/heaviside.hpp"
#include "latwave/io.hpp"
#include "latwave/lattice_state.hpp"
#include "latwave/model.hpp"
#include "latwave/models.hpp"
#include "latwave/ode.hpp"
#include "latwave/profile.hpp"
#include "latwave/speed.hpp"
#include "latwave/stepper.hpp"
#include "latwave/version.hpp"
#include "latwave/wave_solver.hpp"
#include "latwave/weighted_norm.hpp"
