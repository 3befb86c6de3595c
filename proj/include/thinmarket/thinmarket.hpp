#pragma once

#include "analysis.hpp"
#include "best_response.hpp"
#include "competitive.hpp"
#include "elasticity.hpp"
#include "market.hpp"
#include "nash.hpp"
#include "validation.hpp"
