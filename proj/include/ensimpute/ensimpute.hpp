#pragma once

#include "ensimpute/random.hpp"
#include "ensimpute/data.hpp"
#include "ensimpute/missing.hpp"
#include "ensimpute/impute.hpp"
#include "ensimpute/tree.hpp"
#include "ensimpute/ensemble.hpp"
#include "ensimpute/eval.hpp"
#include "ensimpute/config.hpp"
