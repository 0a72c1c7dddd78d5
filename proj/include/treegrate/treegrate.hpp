#pragma once

#include "treegrate/codegen.hpp"
#include "treegrate/errors.hpp"
#include "treegrate/flint.hpp"
#include "treegrate/interp.hpp"
#include "treegrate/model_ir.hpp"
#include "treegrate/quantize.hpp"
#include "treegrate/verify.hpp"
