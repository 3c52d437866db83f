#pragma once

#include "cohkit/augment.hpp"
#include "cohkit/corpus.hpp"
#include "cohkit/errors.hpp"
#include "cohkit/metaeval.hpp"
#include "cohkit/remote.hpp"
#include "cohkit/rng.hpp"
#include "cohkit/scoring.hpp"
#include "cohkit/version.hpp"
