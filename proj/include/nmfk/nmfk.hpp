#pragma once

// Umbrella header.
#include "nmfk/clustering.hpp"
#include "nmfk/data.hpp"
#include "nmfk/ensemble.hpp"
#include "nmfk/errors.hpp"
#include "nmfk/matrix.hpp"
#include "nmfk/nmf.hpp"
#include "nmfk/nnls.hpp"
#include "nmfk/parallel.hpp"
#include "nmfk/pipeline.hpp"
#include "nmfk/random.hpp"
#include "nmfk/report.hpp"
#include "nmfk/selection.hpp"
#include "nmfk/synthetic.hpp"
