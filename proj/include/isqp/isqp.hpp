#pragma once

#include "isqp/errors.hpp"
#include "isqp/problem.hpp"
#include "isqp/kkt.hpp"
#include "isqp/base_mpc.hpp"
#include "isqp/penalty.hpp"
#include "isqp/driver.hpp"
#include "isqp/gen.hpp"
#include "isqp/oracle.hpp"
