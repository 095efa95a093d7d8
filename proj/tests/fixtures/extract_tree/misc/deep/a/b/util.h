#pragma once
/// helper
