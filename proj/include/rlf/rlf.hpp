#pragma once

// Numerical core. The YAML-driven runner lives under rlf/expcli/.
#include "rlf/core.hpp"
#include "rlf/fields.hpp"
#include "rlf/presets.hpp"
#include "rlf/cloud.hpp"
#include "rlf/flow.hpp"
#include "rlf/bracket.hpp"
#include "rlf/weakcalc.hpp"
#include "rlf/io.hpp"
