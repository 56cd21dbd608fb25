#pragma once

#include "umbrela/errors.hpp"
#include "umbrela/trec_io.hpp"
#include "umbrela/digest.hpp"
#include "umbrela/prompt_kit.hpp"
#include "umbrela/score_extract.hpp"
#include "umbrela/metrics.hpp"
#include "umbrela/judge_engine.hpp"
#include "umbrela/meta_eval.hpp"
