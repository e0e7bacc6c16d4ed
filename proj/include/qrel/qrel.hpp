#pragma once

#include "qrel/corpus.hpp"
#include "qrel/error.hpp"
#include "qrel/eval.hpp"
#include "qrel/miner.hpp"
#include "qrel/models/dataset.hpp"
#include "qrel/models/gradcheck.hpp"
#include "qrel/models/lr.hpp"
#include "qrel/models/lstm.hpp"
#include "qrel/models/mlp.hpp"
#include "qrel/models/poslstm.hpp"
#include "qrel/models/relnet.hpp"
#include "qrel/models/serialize.hpp"
#include "qrel/models/train.hpp"
#include "qrel/numerics.hpp"
#include "qrel/premise.hpp"
#include "qrel/textfeat.hpp"
