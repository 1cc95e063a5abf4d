#pragma once

#include "dynlab/errors.hpp"
#include "dynlab/function_model.hpp"
#include "dynlab/parallel.hpp"
#include "dynlab/modulus_analysis.hpp"
#include "dynlab/growth_classifier.hpp"
#include "dynlab/logderiv_toolkit.hpp"
#include "dynlab/proof_engine.hpp"
#include "dynlab/fractal_dimension.hpp"
#include "dynlab/reporting.hpp"
