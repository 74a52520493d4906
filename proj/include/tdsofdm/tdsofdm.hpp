#pragma once

#include "tdsofdm/dsp.hpp"
#include "tdsofdm/frame.hpp"
#include "tdsofdm/channel.hpp"
#include "tdsofdm/analysis.hpp"
#include "tdsofdm/str.hpp"
#include "tdsofdm/montecarlo.hpp"
#include "tdsofdm/scenario.hpp"
#include "tdsofdm/harness.hpp"
#include "tdsofdm/report.hpp"
