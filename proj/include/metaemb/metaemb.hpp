#pragma once

#include "metaemb/autoenc.hpp"
#include "metaemb/baseline.hpp"
#include "metaemb/core.hpp"
#include "metaemb/eval.hpp"
#include "metaemb/fusion.hpp"
#include "metaemb/gcca.hpp"
#include "metaemb/io.hpp"
#include "metaemb/naive.hpp"
#include "metaemb/report.hpp"
#include "metaemb/svd.hpp"
