#pragma once

#include "stackcompat/checker.hpp"
#include "stackcompat/common.hpp"
#include "stackcompat/corpus.hpp"
#include "stackcompat/dictionary.hpp"
#include "stackcompat/graph.hpp"
#include "stackcompat/inference.hpp"
#include "stackcompat/matching.hpp"
#include "stackcompat/pipeline.hpp"
#include "stackcompat/query.hpp"
#include "stackcompat/recognizer.hpp"
#include "stackcompat/service.hpp"
#include "stackcompat/version.hpp"
