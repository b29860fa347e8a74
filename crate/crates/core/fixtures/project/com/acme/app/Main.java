package com.acme.app;

import com.acme.sim.Simulator;
import com.acme.sim.World;
import java.util.List;

public class Main {
    public static void main(String[] args) {
        Simulator sim = new Simulator();
        for (String arg : args) {
            sim.update(arg);
        }
        sim.drain(null);
        System.out.println("done");
    }
}
