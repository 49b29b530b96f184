#pragma once

#include "otrbounds/benefit.hpp"
#include "otrbounds/core.hpp"
#include "otrbounds/heterogeneity.hpp"
#include "otrbounds/inference.hpp"
#include "otrbounds/io.hpp"
#include "otrbounds/lp.hpp"
#include "otrbounds/validation.hpp"
