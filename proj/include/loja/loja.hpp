#pragma once

#include "loja/config.hpp"
#include "loja/errors.hpp"
#include "loja/flow.hpp"
#include "loja/lojasiewicz.hpp"
#include "loja/morse_bott.hpp"
#include "loja/poly.hpp"
#include "loja/poly_text.hpp"
#include "loja/report.hpp"
#include "loja/splitting.hpp"
#include "loja/version.hpp"
