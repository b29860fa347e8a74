package com.acme.util;

public final class Helper {
    private Helper() {
    }

    public static int clamp(int value, int max) {
        int low = Math.max(value, 0);
        int high = Math.min(low, max);
        if (high < 0) {
            return 0;
        }
        return high;
    }

    public static int count(Registry registry) {
        int total = 0;
        if (registry != null) {
            total = registry.size();
        }
        return total;
    }
}
