#pragma once

#include "invlearn/data.hpp"
#include "invlearn/error.hpp"
#include "invlearn/io.hpp"
#include "invlearn/loss.hpp"
#include "invlearn/meta.hpp"
#include "invlearn/metrics.hpp"
#include "invlearn/model.hpp"
#include "invlearn/optim.hpp"
#include "invlearn/rng.hpp"
#include "invlearn/theory.hpp"
