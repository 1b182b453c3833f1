#pragma once

#include "hetal/acquisition.hpp"
#include "hetal/common.hpp"
#include "hetal/data.hpp"
#include "hetal/finetune.hpp"
#include "hetal/io.hpp"
#include "hetal/nn.hpp"
#include "hetal/runner.hpp"
#include "hetal/theory.hpp"
