#pragma once

#include "gae/autoencoder.hpp"
#include "gae/core.hpp"
#include "gae/dataset.hpp"
#include "gae/experiment.hpp"
#include "gae/graph.hpp"
#include "gae/kmeans.hpp"
#include "gae/lasso.hpp"
#include "gae/lbfgs.hpp"
#include "gae/metrics.hpp"
#include "gae/pca.hpp"
#include "gae/serialize.hpp"
#include "gae/stack.hpp"
#include "gae/commands.hpp"
