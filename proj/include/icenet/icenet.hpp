#pragma once

#include "icenet/channel_model.hpp"
#include "icenet/checkpoint.hpp"
#include "icenet/classical.hpp"
#include "icenet/config_file.hpp"
#include "icenet/dataset_io.hpp"
#include "icenet/equilibrium_block.hpp"
#include "icenet/evaluation.hpp"
#include "icenet/explicit_net.hpp"
#include "icenet/fixed_point.hpp"
#include "icenet/ofdm_frame.hpp"
#include "icenet/training.hpp"
