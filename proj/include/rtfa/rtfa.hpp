#pragma once

// Everything except the CLI front end (which pulls in CLI11).

#include "rtfa/machine.hpp"
#include "rtfa/machine_io.hpp"
#include "rtfa/matrix.hpp"
#include "rtfa/montecarlo.hpp"
#include "rtfa/orthonormal.hpp"
#include "rtfa/scalar.hpp"
#include "rtfa/semantics.hpp"
#include "rtfa/transforms.hpp"
#include "rtfa/validate.hpp"
#include "rtfa/zoo.hpp"
