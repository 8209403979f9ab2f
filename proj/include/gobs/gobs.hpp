#pragma once

#include "gobs/core/config.hpp"
#include "gobs/core/error.hpp"
#include "gobs/core/rules.hpp"
#include "gobs/core/types.hpp"
#include "gobs/extract/features.hpp"
#include "gobs/overlay/descriptor.hpp"
#include "gobs/gate/decision.hpp"
#include "gobs/gate/rng.hpp"
#include "gobs/observer/directive.hpp"
#include "gobs/observer/rewrite.hpp"
#include "gobs/client/chat.hpp"
#include "gobs/client/embedding_remote.hpp"
#include "gobs/engine/engine.hpp"
#include "gobs/service/server.hpp"
#include "gobs/eval/corpus.hpp"
#include "gobs/eval/harness.hpp"
#include "gobs/eval/report.hpp"
#include "gobs/eval/score.hpp"
#include "gobs/eval/stats.hpp"
