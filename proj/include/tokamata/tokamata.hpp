#pragma once

// Umbrella header: the whole toolkit in one include.

#include "tokamata/errors.hpp"
#include "tokamata/symbols.hpp"
#include "tokamata/token_mask.hpp"
#include "tokamata/fsa.hpp"
#include "tokamata/fst.hpp"
#include "tokamata/pda.hpp"
#include "tokamata/compose.hpp"
#include "tokamata/vocabulary.hpp"
#include "tokamata/detokenizer.hpp"
#include "tokamata/regex_ast.hpp"
#include "tokamata/regex_compile.hpp"
#include "tokamata/terminal_labels.hpp"
#include "tokamata/grammar.hpp"
#include "tokamata/grammar_pda.hpp"
#include "tokamata/constraint.hpp"
#include "tokamata/schema.hpp"
#include "tokamata/serialize.hpp"
#include "tokamata/dump.hpp"
#include "tokamata/harness.hpp"
